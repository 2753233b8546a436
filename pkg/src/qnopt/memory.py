"""Rolling store of L-BFGS curvature pairs and the compact representation."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DimensionTooLarge, EmptyMemory

EPS_CURV = 1e-8
DEFAULT_M = 20
DENSE_CAP = 256


@dataclass(frozen=True)
class CurvaturePair:
    s: np.ndarray
    y: np.ndarray
    sy: float


@dataclass
class CurvatureMemory:
    """The m most recent accepted (s, y) pairs, oldest first."""

    n: int
    m: int = DEFAULT_M
    pairs: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("memory size must be nonnegative")
        self.pairs = deque(self.pairs, maxlen=self.m)

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return len(self.pairs) > 0

    def clear(self) -> None:
        self.pairs.clear()

    @property
    def S(self) -> np.ndarray:
        return np.column_stack([p.s for p in self.pairs]) if self.pairs else np.zeros((self.n, 0))

    @property
    def Y(self) -> np.ndarray:
        return np.column_stack([p.y for p in self.pairs]) if self.pairs else np.zeros((self.n, 0))

    def newest(self, k: int) -> "CurvatureMemory":
        """A detached copy holding only the k most recent pairs."""
        keep = list(self.pairs)[max(len(self.pairs) - k, 0):] if k > 0 else []
        return CurvatureMemory(self.n, self.m, deque(keep))


def try_accept_pair(mem: CurvatureMemory, s, y, eps_curv: float = EPS_CURV) -> bool:
    """Append (s, y) iff s'y > eps_curv * |s| |y|; the oldest pair is evicted when full."""
    s = np.asarray(s, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if s.shape != (mem.n,) or y.shape != (mem.n,):
        raise DimensionMismatch(f"expected vectors of length {mem.n}, got {s.shape} and {y.shape}")
    if mem.m == 0 or not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        return False
    sy = float(s @ y)
    if not sy > eps_curv * np.linalg.norm(s) * np.linalg.norm(y):
        return False
    mem.pairs.append(CurvaturePair(s.copy(), y.copy(), sy))
    return True


def gamma(mem: CurvatureMemory) -> float:
    """B0 scaling y'y / y's of the most recent pair (1 for an empty memory)."""
    if not mem.pairs:
        return 1.0
    last = mem.pairs[-1]
    return float(last.y @ last.y) / last.sy


@dataclass(frozen=True)
class CompactFactors:
    """B = gamma*I + psi @ inv(m_inv) @ psi.T, with m_inv kept unfactored."""

    psi: np.ndarray
    m_inv: np.ndarray
    gamma: float

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @classmethod
    def scaled_identity(cls, n: int, gamma: float = 1.0) -> "CompactFactors":
        return cls(np.zeros((n, 0)), np.zeros((0, 0)), float(gamma))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.gamma * v
        if self.psi.shape[1]:
            out = out + self.psi @ np.linalg.solve(self.m_inv, self.psi.T @ v)
        return out

    def dense(self) -> np.ndarray:
        b = self.gamma * np.eye(self.n)
        if self.psi.shape[1]:
            b += self.psi @ np.linalg.solve(self.m_inv, self.psi.T)
        return 0.5 * (b + b.T)


def compact_rep(mem: CurvatureMemory) -> CompactFactors:
    if not mem.pairs:
        raise EmptyMemory("compact representation needs at least one pair")
    g = gamma(mem)
    S, Y = mem.S, mem.Y
    sty = S.T @ Y
    lower = np.tril(sty, -1)
    diag = np.diag(np.diag(sty))
    m_inv = np.block([[-g * (S.T @ S), -lower], [-lower.T, diag]])
    return CompactFactors(np.hstack([g * S, Y]), 0.5 * (m_inv + m_inv.T), g)


def _check_dense(mem: CurvatureMemory) -> None:
    if mem.n > DENSE_CAP:
        raise DimensionTooLarge(f"dense oracle limited to n <= {DENSE_CAP}")


def bfgs_dense(mem: CurvatureMemory) -> np.ndarray:
    """Sequential BFGS updates from gamma*I, oldest pair first (test oracle)."""
    _check_dense(mem)
    b = gamma(mem) * np.eye(mem.n)
    for p in mem.pairs:
        bs = b @ p.s
        b = b - np.outer(bs, bs) / (p.s @ bs) + np.outer(p.y, p.y) / p.sy
    return 0.5 * (b + b.T)


def hessian_inverse_dense(mem: CurvatureMemory) -> np.ndarray:
    """Sequential inverse-BFGS updates from I/gamma, oldest pair first (test oracle)."""
    _check_dense(mem)
    eye = np.eye(mem.n)
    h = eye / gamma(mem)
    for p in mem.pairs:
        v = eye - np.outer(p.y, p.s) / p.sy
        h = v.T @ h @ v + np.outer(p.s, p.s) / p.sy
    return 0.5 * (h + h.T)
