"""Backtracking Wolfe line search and the line-search L-BFGS driver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .direction import two_loop
from .errors import NotDescent
from .memory import DEFAULT_M, EPS_CURV, CurvatureMemory, try_accept_pair
from .problems.oracle import CountingOracle, ObjectiveOracle
from .records import Clock, IterationRecord


@dataclass(frozen=True)
class WolfeParams:
    c1: float = 1e-4
    c2: float = 0.9
    alpha_init: float = 1.0
    alpha_min: float = 0.1
    backtrack: float = 0.5
    max_trials: int = 20

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if not 0.0 < self.alpha_min <= self.alpha_init:
            raise ValueError("need 0 < alpha_min <= alpha_init")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.max_trials < 1:
            raise ValueError("max_trials must be positive")


@dataclass(frozen=True)
class DriverConfig:
    grad_tol: float = 1e-5
    max_iters: int = 200
    memory: int = DEFAULT_M
    eps_curv: float = EPS_CURV

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


def wolfe_conditions(f0, slope0, f_new, slope_new, alpha, c1, c2) -> tuple[bool, bool]:
    """(sufficient decrease, curvature) for a trial step of length alpha."""
    return f_new <= f0 + c1 * alpha * slope0, slope_new >= c2 * slope0


def wolfe_search(oracle: ObjectiveOracle, w, p, f0: float, g0, params: WolfeParams = WolfeParams()):
    """Backtrack from alpha_init until both Wolfe conditions hold.

    Trials shrink by ``params.backtrack`` and are floored at ``alpha_min``; if
    the floor trial also fails, (alpha_min, False, f, g) of that trial is
    returned and the caller still takes the step.
    """
    slope0 = float(np.dot(g0, p))
    if not slope0 < 0.0:
        raise NotDescent(f"g'p = {slope0:g} is not negative")
    alpha = params.alpha_init
    for _ in range(params.max_trials):
        f_new, g_new = oracle.eval(w + alpha * p)
        decrease, curvature = wolfe_conditions(f0, slope0, f_new, float(np.dot(g_new, p)), alpha,
                                               params.c1, params.c2)
        if decrease and curvature:
            return alpha, True, f_new, g_new
        if alpha <= params.alpha_min:
            break
        alpha = max(alpha * params.backtrack, params.alpha_min)
    return alpha, False, f_new, g_new


def first_step_scale(g: np.ndarray) -> float:
    # with an empty memory H = I, so cap the first trial step at unit length
    return min(1.0, 1.0 / max(float(np.linalg.norm(g)), np.finfo(float).tiny))


def ls_minimize(oracle: ObjectiveOracle, w0, cfg: DriverConfig = DriverConfig(),
                wolfe: WolfeParams = WolfeParams(), mem: CurvatureMemory | None = None):
    """Line-search L-BFGS. Returns (w, records); one record per iteration taken."""
    counted = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    w = np.array(w0, dtype=float)
    mem = CurvatureMemory(w.size, cfg.memory) if mem is None else mem
    clock = Clock()
    records: list[IterationRecord] = []
    f, g = counted.eval(w)
    for k in range(cfg.max_iters):
        if np.linalg.norm(g) < cfg.grad_tol:
            break
        p = two_loop(mem, g)
        if not mem:
            p *= first_step_scale(g)
        alpha, ok, f_new, g_new = wolfe_search(counted, w, p, f, g, wolfe)
        s = alpha * p
        try_accept_pair(mem, s, g_new - g, cfg.eps_curv)
        w = w + s
        f, g = f_new, g_new
        records.append(IterationRecord(k, float(f), float(np.linalg.norm(g)), alpha, None, ok,
                                       counted.fevals, counted.gevals, clock.ms()))
    return w, records
