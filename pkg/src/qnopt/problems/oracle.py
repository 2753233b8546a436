"""Objective oracle interface: full and batch value/gradient over parameters w."""
from __future__ import annotations

from typing import Sequence

import numpy as np


class ObjectiveOracle:
    """Empirical risk L(w) = mean_i l_i(w) over ``n_samples`` terms.

    Subclasses implement ``eval_batch``; ``eval`` is the full-batch case.
    Non-ERM test functions expose a single sample.
    """

    dim: int
    n_samples: int = 1

    def eval_batch(self, w: np.ndarray, idx: Sequence[int] | None) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def eval(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        return self.eval_batch(w, None)

    def loss(self, w: np.ndarray) -> float:
        return self.eval(w)[0]

    def loss_batch(self, w: np.ndarray, idx) -> float:
        return self.eval_batch(w, idx)[0]


class CountingOracle(ObjectiveOracle):
    """Wraps an oracle and counts function and gradient evaluations."""

    def __init__(self, inner: ObjectiveOracle):
        self.inner = inner
        self.dim = inner.dim
        self.n_samples = inner.n_samples
        self.fevals = 0
        self.gevals = 0

    def eval_batch(self, w, idx):
        self.fevals += 1
        self.gevals += 1
        return self.inner.eval_batch(w, idx)

    def eval(self, w):
        self.fevals += 1
        self.gevals += 1
        return self.inner.eval(w)

    def loss(self, w):
        self.fevals += 1
        return self.inner.loss(w)

    def loss_batch(self, w, idx):
        self.fevals += 1
        return self.inner.loss_batch(w, idx)

    def __getattr__(self, name):
        # forwards problem-specific helpers (accuracy, predict, ...)
        return getattr(self.inner, name)


class BatchView(ObjectiveOracle):
    """Restricts an ERM oracle to a fixed index subset (e.g. one overlap set)."""

    def __init__(self, inner: ObjectiveOracle, idx):
        self.inner = inner
        self.idx = np.asarray(idx, dtype=int)
        self.dim = inner.dim
        self.n_samples = len(self.idx)

    def eval_batch(self, w, idx):
        sub = self.idx if idx is None else self.idx[np.asarray(idx, dtype=int)]
        return self.inner.eval_batch(w, sub)

    def loss(self, w):
        return self.inner.loss_batch(w, self.idx)


def check_gradient(oracle: ObjectiveOracle, w: np.ndarray, coords=None, h_scale: float = 1e-5,
                   idx=None) -> float:
    """Largest relative error between the analytic gradient and central differences.

    Per coordinate the error is |g_i - fd_i| / max(|g_i|, |fd_i|, 1e-3 * |g|), so
    coordinates that are negligible relative to the full gradient do not dominate.
    The step is h = h_scale * (1 + |w_i|).
    """
    w = np.asarray(w, dtype=float)
    _, g = oracle.eval_batch(w, idx)
    coords = range(oracle.dim) if coords is None else coords
    scale = max(np.linalg.norm(g), 1e-8)
    worst = 0.0
    for i in coords:
        h = h_scale * (1.0 + abs(w[i]))
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        fd = (oracle.loss_batch(wp, idx) - oracle.loss_batch(wm, idx)) / (2 * h)
        err = abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-3 * scale)
        worst = max(worst, err)
    return worst
