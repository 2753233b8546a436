"""Two-loop recursion for the L-BFGS search direction."""
from __future__ import annotations

import numpy as np

from .errors import NonFiniteGradient
from .memory import CurvatureMemory, gamma


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b)


def _axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return y + alpha * x


def two_loop(mem: CurvatureMemory, g) -> np.ndarray:
    """Return p = -H g with H the L-BFGS inverse built from ``mem``.

    H0 = (y's / y'y) I from the newest pair, i.e. the inverse of B0 = gamma I.
    Costs one inner product and one axpy per stored pair in each loop.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("gradient contains non-finite entries")
    pairs = list(mem.pairs)
    q = g.copy()
    alphas = []
    for p in reversed(pairs):
        a = _dot(p.s, q) / p.sy
        q = _axpy(-a, p.y, q)
        alphas.append(a)
    r = q / gamma(mem)
    for p, a in zip(pairs, reversed(alphas)):
        beta = _dot(p.y, r) / p.sy
        r = _axpy(a - beta, p.s, r)
    return -r
