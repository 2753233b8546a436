"""Multi-batch sampling with overlap, overlap-based curvature pairs, SGD and the cost model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .direction import two_loop
from .errors import StaleOverlap
from .linesearch import WolfeParams, first_step_scale, wolfe_search
from .memory import EPS_CURV, CurvatureMemory, try_accept_pair
from .problems.oracle import BatchView, CountingOracle, ObjectiveOracle
from .records import Clock, IterationRecord


class OverlapGradient(NamedTuple):
    """A gradient together with the index set it was averaged over."""

    indices: np.ndarray
    grad: np.ndarray


@dataclass
class OverlapState:
    prev_overlap_grad: Optional[OverlapGradient]
    overlap_indices: np.ndarray
    batch_size: int


@dataclass(frozen=True)
class CostParams:
    b: float
    b_s: float
    f: float
    z: float
    m: float

    def __post_init__(self):
        if min(self.b, self.b_s, self.f) <= 0 or min(self.z, self.m) < 0:
            raise ValueError("cost parameters must be positive")


def cost_ratio(p: CostParams) -> float:
    """Runtime of multi-batch L-BFGS relative to frequent small-batch SGD: fz/b_s + 4fm/(b b_s)."""
    return p.f * p.z / p.b_s + 4 * p.f * p.m / (p.b * p.b_s)


def overlap_y(oracle: ObjectiveOracle, w_next, prev: OverlapGradient, overlap) -> np.ndarray:
    """Gradient difference on one sample set O evaluated at w_{k+1} and w_k."""
    overlap = np.asarray(overlap, dtype=int)
    if not np.array_equal(np.asarray(prev.indices, dtype=int), overlap):
        raise StaleOverlap("previous gradient was computed on a different index set")
    _, g_next = oracle.eval_batch(w_next, overlap)
    return g_next - prev.grad


def combined_gradient(g_prev_overlap, g_curr_overlap) -> np.ndarray:
    return 0.5 * (np.asarray(g_prev_overlap, dtype=float) + np.asarray(g_curr_overlap, dtype=float))


class OverlapSampler:
    """Draws batches J_k of size b where J_{k+1} keeps a designated overlap O_k from J_k."""

    def __init__(self, n_samples: int, batch_size: int, overlap_frac: float = 0.5, seed: int = 0):
        if not 0 < batch_size <= n_samples:
            raise ValueError("batch size must lie in [1, n_samples]")
        if not 0.0 < overlap_frac <= 1.0:
            raise ValueError("overlap fraction must lie in (0, 1]")
        self.n = n_samples
        self.b = batch_size
        self.n_overlap = max(1, int(round(overlap_frac * batch_size)))
        self.rng = np.random.default_rng(seed)
        self.batch = np.sort(self.rng.choice(n_samples, batch_size, replace=False))
        self.overlap = self._pick_overlap()

    def _pick_overlap(self) -> np.ndarray:
        return np.sort(self.rng.choice(self.batch, self.n_overlap, replace=False))

    def advance(self) -> np.ndarray:
        """Move to J_{k+1} = O_k plus fresh indices; returns the new batch."""
        fresh_needed = self.b - self.n_overlap
        mask = np.ones(self.n, dtype=bool)
        mask[self.overlap] = False
        pool = np.flatnonzero(mask)
        fresh = self.rng.choice(pool, min(fresh_needed, len(pool)), replace=False)
        self.batch = np.sort(np.concatenate([self.overlap, fresh]))
        self.overlap = self._pick_overlap()
        return self.batch


def multibatch_lbfgs(oracle: ObjectiveOracle, w0, sampler: OverlapSampler, iters: int,
                     m: int = 20, wolfe: WolfeParams | None = WolfeParams(), alpha: float = 1.0,
                     eps_curv: float = EPS_CURV, grad_tol: float = 0.0, callback=None):
    """Stochastic L-BFGS on overlapping batches.

    Directions use the batch gradient on J_k; curvature pairs difference the
    gradient on the overlap O_k at w_{k+1} and w_k. With ``wolfe=None`` a fixed
    step ``alpha`` is used. Returns (w, records, mem).
    """
    counted = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    w = np.array(w0, dtype=float)
    mem = CurvatureMemory(w.size, m)
    clock = Clock()
    records = []
    for k in range(iters):
        batch, overlap = sampler.batch, sampler.overlap
        f, g = counted.eval_batch(w, batch)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            break
        _, g_overlap = counted.eval_batch(w, overlap)
        p = two_loop(mem, g)
        if not mem:
            p *= first_step_scale(g)
        if wolfe is None:
            step, ok = alpha, True
            f_new = None
        else:
            step, ok, f_new, _ = wolfe_search(BatchView(counted, batch), w, p, f, g, wolfe)
        s = step * p
        w_next = w + s
        y = overlap_y(counted, w_next, OverlapGradient(overlap, g_overlap), overlap)
        try_accept_pair(mem, s, y, eps_curv)
        w = w_next
        if callback is not None:
            callback(k, w, mem)
        records.append(IterationRecord(k, float(f if f_new is None else f_new), gnorm, step, None, ok,
                                       counted.fevals, counted.gevals, clock.ms()))
        sampler.advance()
    return w, records, mem


def sgd_minimize(oracle: ObjectiveOracle, w0, lr: float, batch: int, steps: int, seed: int = 0):
    """Fixed learning-rate SGD over uniformly drawn batches. Returns (w, records)."""
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    counted = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    rng = np.random.default_rng(seed)
    w = np.array(w0, dtype=float)
    clock = Clock()
    records = []
    full = batch >= oracle.n_samples
    for k in range(steps):
        idx = None if full else rng.choice(oracle.n_samples, batch, replace=False)
        f, g = counted.eval_batch(w, idx)
        if np.all(np.isfinite(g)):
            w = w - lr * g
        records.append(IterationRecord(k, float(f), float(np.linalg.norm(g)), lr, None, True,
                                       counted.fevals, counted.gevals, clock.ms()))
    return w, records
