"""Convergence-bound probe and fixed-budget timing comparison."""
from __future__ import annotations

import time
from typing import NamedTuple

import numpy as np

from .errors import StepTooLarge
from .linesearch import DriverConfig, WolfeParams, first_step_scale, ls_minimize
from .memory import hessian_inverse_dense
from .multibatch import OverlapSampler, multibatch_lbfgs, sgd_minimize
from .problems.data import synthetic_digits
from .problems.functions import make_quadratic
from .problems.mlp import MlpSpec, mlp_oracle
from .problems.oracle import CountingOracle
from .trustregion import TrConfig, tr_minimize

NOISE_DRAWS = 200
OFFSET_FLOOR = 1e-15
RESOLVED_OFFSET = 1e-20


class ProbeReport(NamedTuple):
    offsets: np.ndarray      # L(w_k) - L(w*), k = 0..iters
    rate: float              # fitted per-iteration decay factor over the decaying phase
    lam_h: float             # smallest eigenvalue of any H_k used
    Lam_h: float             # largest eigenvalue of any H_k used
    eta: float               # batch-gradient noise level at w*
    contraction: float       # 1 - 2 alpha lam lam_h
    residual: float          # alpha^2 Lam_h^2 Lam eta^2 / (4 lam_h lam)
    bound: np.ndarray        # C contraction^k + residual
    bound_holds: bool
    plateau: float           # mean offset over the final quarter


def _fit_rate(offsets: np.ndarray) -> float:
    """exp(slope) of a least-squares line through log offsets above the float floor."""
    k = np.flatnonzero(offsets > OFFSET_FLOOR)
    if len(k) < 2:
        return 0.0
    slope = np.polyfit(k, np.log(offsets[k]), 1)[0]
    return float(np.exp(slope))


def probe_bound(lam: float = 1.0, Lam: float = 10.0, alpha: float = 1.0, iters: int = 60,
                n: int = 10, m: int = 5, batch: int | None = None, n_samples: int = 256,
                noise: float = 1.0, seed: int = 0) -> ProbeReport:
    """Fixed-step L-BFGS on a quadratic with Hessian spectrum in [lam, Lam].

    ``batch=None`` is the exact full-gradient case. Otherwise every sample carries
    its own linear term and the iterates use overlapping batches of that size.
    The step condition alpha < 1/(2 lam lam_h) involves the observed H_k, so it is
    checked after the run and StepTooLarge is raised if it was violated.
    """
    if alpha < 0:
        raise StepTooLarge("step size must be nonnegative")
    stochastic = batch is not None
    q = make_quadratic(n, lam, Lam, seed, n_samples if stochastic else 1, noise if stochastic else 0.0)
    sampler = OverlapSampler(q.n_samples, batch if stochastic else q.n_samples, 0.5, seed)
    w0 = np.zeros(n)
    offsets = [q.offset(w0)]
    g0 = q.eval_batch(w0, sampler.batch)[1]
    eigs = [first_step_scale(g0)]

    def track(k, w, mem):
        offsets.append(q.offset(w))
        # once the iterate sits at roundoff level its pairs are noise, not curvature
        if len(mem) and k + 1 < iters and offsets[-1] > RESOLVED_OFFSET:
            ev = np.linalg.eigvalsh(hessian_inverse_dense(mem))
            eigs.extend([ev[0], ev[-1]])

    multibatch_lbfgs(q, w0, sampler, iters, m=m, wolfe=None, alpha=alpha, callback=track)
    offsets = np.asarray(offsets)
    lam_h, Lam_h = float(min(eigs)), float(max(eigs))
    if alpha > 0 and alpha >= 1.0 / (2 * lam * lam_h):
        raise StepTooLarge(f"alpha {alpha:g} >= 1/(2 lam lam_h) = {1.0 / (2 * lam * lam_h):g}")

    eta = 0.0
    if stochastic:
        rng = np.random.default_rng([seed, 7])
        w_star = q.minimizer
        sq = [np.sum(q.eval_batch(w_star, rng.choice(q.n_samples, batch, replace=False))[1] ** 2)
              for _ in range(NOISE_DRAWS)]
        eta = float(np.sqrt(np.mean(sq)))
    contraction = 1.0 - 2.0 * alpha * lam * lam_h
    residual = alpha**2 * Lam_h**2 * Lam * eta**2 / (4 * lam_h * lam)
    bound = offsets[0] * contraction ** np.arange(len(offsets)) + residual
    tail = offsets[-max(1, len(offsets) // 4):]
    return ProbeReport(offsets, _fit_rate(offsets), lam_h, Lam_h, eta, contraction, residual, bound,
                       bool(np.all(offsets <= bound * (1 + 1e-9) + OFFSET_FLOOR)), float(tail.mean()))


class TimingRow(NamedTuple):
    method: str
    b: int
    m: int
    iters: int
    wall_ms: float
    fevals: int
    gevals: int


TIMING_METHODS = ("ls-lbfgs", "tr-lbfgs", "sgd")


def timing_compare(methods=TIMING_METHODS, batch_sizes=(128, 256), m_values=(5, 20), iters: int = 200,
                   seed: int = 0, hidden: int = 64, lr: float = 0.1) -> list[TimingRow]:
    """Wall time and oracle counters for `iters` iterations per (method, b, m) cell.

    Each L-BFGS cell optimizes the classifier loss over a fixed sample of b
    examples; SGD takes `iters` steps with batches of b from the same pool
    (its m column is meaningless and reported as 0). The gradient tolerance is
    effectively disabled so every cell runs the full budget.
    """
    data = synthetic_digits(max(batch_sizes), seed)
    rows = []
    for b in batch_sizes:
        oracle = mlp_oracle(MlpSpec((data.inputs.shape[1], hidden, data.n_classes)),
                            data.subset(np.arange(b)))
        w0 = oracle.init_params(seed)
        for method in methods:
            for m in (m_values if method != "sgd" else (0,)):
                counted = CountingOracle(oracle)
                start = time.perf_counter()
                if method == "ls-lbfgs":
                    _, recs = ls_minimize(counted, w0, DriverConfig(1e-300, iters, m), WolfeParams())
                elif method == "tr-lbfgs":
                    _, recs = tr_minimize(counted, w0, TrConfig(grad_tol=1e-300, max_iters=iters, memory=m))
                elif method == "sgd":
                    _, recs = sgd_minimize(counted, w0, lr, b, iters, seed)
                else:
                    raise ValueError(f"unknown method {method!r}")
                wall = 1e3 * (time.perf_counter() - start)
                rows.append(TimingRow(method, b, m, len(recs), wall, counted.fevals, counted.gevals))
    return rows
