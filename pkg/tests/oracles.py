"""Brute-force references that share no code path with the library solvers."""
import numpy as np


def dense_tr_solve(B, g, delta, iters=200):
    """Global minimizer of g'p + 1/2 p'Bp, |p| <= delta, from a full eigendecomposition of B.

    sigma is located by plain bisection on |p(sigma)| = delta; the hard case
    (no gradient weight on the bottom eigenspace) is completed along that eigenvector.
    """
    lam, V = np.linalg.eigh(B)
    c = V.T @ g
    lo = max(0.0, -lam[0])

    def norm(sigma):
        with np.errstate(divide="ignore"):
            return np.linalg.norm(c / (lam + sigma))

    if lam[0] > 0 and norm(0.0) <= delta:
        return -V @ (c / lam)
    bottom = np.abs(lam - lam[0]) <= 1e-10 * max(1.0, abs(lam[0]))
    if np.all(np.abs(c[bottom]) <= 1e-14 * max(1.0, np.linalg.norm(g))):
        rest = ~bottom
        p = -V[:, rest] @ (c[rest] / (lam[rest] + lo))
        if np.linalg.norm(p) <= delta:
            z = V[:, np.flatnonzero(bottom)[0]]
            return p + np.sqrt(delta**2 - p @ p) * z
    hi = lo + np.linalg.norm(g) / delta + 1.0
    while norm(hi) > delta:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if norm(mid) > delta:
            lo = mid
        else:
            hi = mid
    return -V @ (c / (lam + hi))


def model(B, g, p):
    return float(g @ p + 0.5 * p @ B @ p)
