"""Analytic objectives used as convergence probes."""
from __future__ import annotations

import numpy as np

from .oracle import ObjectiveOracle


def _rows(n_samples, idx):
    return np.arange(n_samples) if idx is None else np.asarray(idx, dtype=int)


class Quadratic(ObjectiveOracle):
    """L(w) = mean_i [1/2 w'Aw - b_i'w] with a shared Hessian A.

    With one sample this is the plain strongly convex quadratic. With many,
    batch gradients A w - mean(b_J) are noisy but the Hessian is exact, so
    overlap gradient differences equal A s.
    """

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        self.b = b[None, :] if b.ndim == 1 else b
        self.dim = self.A.shape[0]
        self.n_samples = self.b.shape[0]
        self.b_mean = self.b.mean(axis=0)

    def eval_batch(self, w, idx):
        w = np.asarray(w, dtype=float)
        bj = self.b_mean if idx is None else self.b[_rows(self.n_samples, idx)].mean(axis=0)
        aw = self.A @ w
        return float(0.5 * w @ aw - bj @ w), aw - bj

    @property
    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b_mean)

    @property
    def min_value(self) -> float:
        return self.loss(self.minimizer)

    def offset(self, w) -> float:
        """L(w) - L(w*) computed as 1/2 e'Ae, free of cancellation near the optimum."""
        e = np.asarray(w, dtype=float) - self.minimizer
        return float(0.5 * e @ self.A @ e)


def make_quadratic(n: int = 10, lam: float = 1.0, Lam: float = 10.0, seed: int = 0,
                   n_samples: int = 1, noise: float = 0.0) -> Quadratic:
    """Random rotation of a spectrum spread evenly over [lam, Lam]."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    spectrum = np.linspace(lam, Lam, n)
    A = (q * spectrum) @ q.T
    A = 0.5 * (A + A.T)
    center = rng.standard_normal(n)
    b = center + noise * rng.standard_normal((n_samples, n))
    if n_samples > 1:
        b -= b.mean(axis=0) - center
    return Quadratic(A, b)


class Rosenbrock(ObjectiveOracle):
    """Chained Rosenbrock; the 2-D case is the classic banana with minimum at (1, 1)."""

    def __init__(self, dim: int = 2, a: float = 1.0, c: float = 100.0):
        self.dim = dim
        self.a = a
        self.c = c

    def eval_batch(self, w, idx=None):
        w = np.asarray(w, dtype=float)
        x, nxt = w[:-1], w[1:]
        t = nxt - x**2
        u = self.a - x
        f = float(np.sum(self.c * t**2 + u**2))
        g = np.zeros_like(w)
        g[:-1] = -4 * self.c * x * t - 2 * u
        g[1:] += 2 * self.c * t
        return f, g


class Logistic(ObjectiveOracle):
    """Binary logistic regression with labels in {0, 1} and an L2 term."""

    def __init__(self, X, y, l2: float = 1e-3):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.l2 = l2
        self.n_samples, self.dim = self.X.shape

    def eval_batch(self, w, idx):
        w = np.asarray(w, dtype=float)
        rows = _rows(self.n_samples, idx)
        X, y = self.X[rows], self.y[rows]
        z = X @ w
        # log(1 + e^z) - y z, computed stably
        loss = np.logaddexp(0.0, z) - y * z
        prob = 0.5 * (1.0 + np.tanh(0.5 * z))
        f = float(loss.mean() + 0.5 * self.l2 * w @ w)
        g = X.T @ (prob - y) / len(rows) + self.l2 * w
        return f, g

    def accuracy(self, w) -> float:
        return float(np.mean((self.X @ w > 0) == (self.y > 0.5)))


def make_logistic(n_samples: int = 200, dim: int = 10, seed: int = 0, l2: float = 1e-3) -> Logistic:
    """Linearly separable synthetic data: labels from a random hyperplane with a margin."""
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(dim)
    w_true /= np.linalg.norm(w_true)
    X = rng.standard_normal((n_samples, dim))
    margin = X @ w_true
    X += np.outer(np.sign(margin) * 0.5, w_true)
    y = (X @ w_true > 0).astype(float)
    return Logistic(X, y, l2)


def test_functions(seed: int = 0) -> dict[str, ObjectiveOracle]:
    return {
        "quadratic": make_quadratic(10, 1.0, 10.0, seed),
        "rosenbrock": Rosenbrock(2),
        "logistic": make_logistic(seed=seed),
    }


test_functions.__test__ = False
