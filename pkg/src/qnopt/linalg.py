"""Small dense kernels used by the compact L-BFGS machinery.

Everything here operates on tall-skinny (n x 2m) or tiny square (2m x 2m)
matrices, so LAPACK-backed numpy routines are used directly; the wrappers
only add the rank/symmetry/conditioning contracts the callers rely on.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NotSymmetric, RankDeficient, Singular

RANK_TOL = 1e-12
SYM_TOL = 1e-10
COND_MAX = 1e12


class SpectralFactors(NamedTuple):
    eigvecs: np.ndarray
    eigvals: np.ndarray


def qr_thin(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder thin QR with a nonnegative diagonal on R.

    Raises RankDeficient with the first offending column when
    |R[j, j]| < 1e-12 * ||A||_F, or when A has more columns than rows.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("qr_thin expects a 2-D array")
    n, k = a.shape
    if k > n:
        raise RankDeficient(n, f"{k} columns exceed {n} rows")
    if k == 0:
        return np.zeros((n, 0)), np.zeros((0, 0))
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    r = signs[:, None] * r
    scale = np.linalg.norm(a)
    small = np.flatnonzero(np.abs(np.diag(r)) < RANK_TOL * scale)
    if scale == 0.0 or small.size:
        raise RankDeficient(int(small[0]) if small.size else 0)
    return q, np.triu(r)


def qr_rank_revealing(a: np.ndarray, tol: float = RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Column-pivoted QR truncated to numerical rank: A ~= Q @ R, Q (n x r), R (r x k).

    R is returned in the original column order (upper trapezoidal only after
    pivoting). Trailing pivots below tol * ||A||_F are discarded, so this also
    covers k > n and exactly dependent columns.
    """
    a = np.asarray(a, dtype=float)
    n, k = a.shape
    if k == 0 or not np.any(a):
        return np.zeros((n, 0)), np.zeros((0, k))
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d >= tol * np.linalg.norm(a)))
    unpivoted = np.empty_like(r[:rank])
    unpivoted[:, piv] = r[:rank]
    return q[:, :rank], unpivoted


def sym_eig(a: np.ndarray) -> SpectralFactors:
    """Eigendecomposition of a small symmetric matrix, eigenvalues ascending."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric("matrix is not square")
    if a.size == 0:
        return SpectralFactors(np.zeros((0, 0)), np.zeros(0))
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYM_TOL * max(scale, np.finfo(float).tiny):
        raise NotSymmetric("asymmetry exceeds 1e-10 relative")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    return SpectralFactors(vecs, vals)


def solve_small(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a small square system, refusing ill-conditioned inputs.

    The system is symmetrically equilibrated by sqrt|diag(A)| first, so the
    conditioning test (< 1e12) ignores mere differences in row/column scale.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError("solve_small needs a square matrix and a matching right-hand side")
    if a.shape[0] == 0:
        return np.zeros_like(b)
    diag = np.abs(np.diag(a))
    scale = 1.0 / np.sqrt(diag) if np.all(diag > 0) else np.ones(len(diag))
    scaled = scale[:, None] * a * scale[None, :]
    if not np.all(np.isfinite(scaled)) or np.linalg.cond(scaled) >= COND_MAX:
        raise Singular("condition number exceeds 1e12")
    rhs = scale[:, None] * b if b.ndim == 2 else scale * b
    try:
        x = np.linalg.solve(scaled, rhs)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from exc
    return scale[:, None] * x if b.ndim == 2 else scale * x
