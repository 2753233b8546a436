"""Trust-region L-BFGS (TRMinATR) with a closed-form compact-representation subproblem solver.

The subproblem  min g'p + 1/2 p'Bp  s.t. |p| <= delta  is solved in the
spectral coordinates of B = gamma I + Psi M Psi': a thin QR of Psi and an
eigendecomposition of R M R' give every eigenvalue of B, so the secular
equation is a scalar problem in at most 2m + 1 distinct eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HardCaseUnresolved, NonPositivePred, Singular
from .linalg import qr_rank_revealing, solve_small, sym_eig
from .memory import (EPS_CURV, CompactFactors, CurvatureMemory, compact_rep, gamma,
                     try_accept_pair)
from .problems.oracle import CountingOracle, ObjectiveOracle
from .records import Clock, IterationRecord

SECULAR_TOL = 1e-10
SECULAR_MAX_ITERS = 200


@dataclass(frozen=True)
class TrSolution:
    p: np.ndarray
    sigma: float
    on_boundary: bool
    opt_residual: float
    compl_residual: float
    lambda_min: float


@dataclass(frozen=True)
class TrConfig:
    delta0: float = 1.0
    delta_max: float = 1e4
    eta: float = 1e-3
    shrink: float = 0.25
    grow: float = 2.0
    grad_tol: float = 1e-5
    max_iters: int = 200
    memory: int = 20
    eps_curv: float = EPS_CURV

    def __post_init__(self):
        if not 0.0 < self.delta0 < self.delta_max:
            raise ValueError("need 0 < delta0 < delta_max")
        if not 0.0 <= self.eta < 0.25:
            raise ValueError("eta must lie in [0, 1/4)")


@dataclass(frozen=True)
class Spectrum:
    """B = U diag(lam) U' + gamma (I - U U')."""

    U: np.ndarray
    lam: np.ndarray
    gamma: float

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def has_complement(self) -> bool:
        return self.U.shape[1] < self.n

    def eigenvalues(self) -> np.ndarray:
        extra = [self.gamma] if self.has_complement else []
        return np.concatenate([self.lam, extra])


def spectrum(factors: CompactFactors) -> Spectrum:
    """Eigen-structure of the compact matrix without forming any n x n array.

    Psi is rank deficient whenever the pairs come from one trajectory (all s
    and y lie in the span of k + 1 gradients), so a rank-revealing QR is used
    and only the r = rank(Psi) nontrivial eigenpairs are kept.
    """
    if factors.psi.shape[1] == 0:
        return Spectrum(np.zeros((factors.n, 0)), np.zeros(0), factors.gamma)
    q, r = qr_rank_revealing(factors.psi)
    rmr = r @ solve_small(factors.m_inv, r.T)
    vecs, vals = sym_eig(0.5 * (rmr + rmr.T))
    return Spectrum(q @ vecs, vals + factors.gamma, factors.gamma)


def _p_norm(sigma, a, lam, perp2, gam):
    total = np.sum((a / (lam + sigma)) ** 2)
    if perp2:
        total += perp2 / (gam + sigma) ** 2
    return np.sqrt(total)


def _secular_root(a, lam, perp2, gam, delta, lo, hi):
    """Root of phi(s) = 1/|p(s)| - 1/delta on (lo, hi] by safeguarded Newton."""
    sigma = lo
    for _ in range(SECULAR_MAX_ITERS):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = lam + sigma
            norm = _p_norm(sigma, a, lam, perp2, gam)
        if not np.isfinite(norm):  # sitting on a pole at lo
            sigma = 0.5 * (lo + hi)
            continue
        if abs(norm - delta) <= SECULAR_TOL * delta:
            return sigma
        phi = 1.0 / norm - 1.0 / delta
        if phi < 0:
            lo = sigma
        else:
            hi = sigma
        dphi = np.sum(a**2 / d**3)
        if perp2:
            dphi += perp2 / (gam + sigma) ** 3
        dphi /= norm**3
        step = sigma - phi / dphi if dphi > 0 else np.nan
        sigma = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            return sigma
    raise HardCaseUnresolved("secular equation did not converge")


def _smw_step(factors: CompactFactors, g, tau) -> np.ndarray:
    psi = factors.psi
    if psi.shape[1] == 0:
        return -g / tau
    inner = tau * factors.m_inv + psi.T @ psi
    return -(g - psi @ np.linalg.solve(inner, psi.T @ g)) / tau


def solve_subproblem(factors: CompactFactors, g, delta: float, spec: Spectrum | None = None) -> TrSolution:
    """Global minimizer of g'p + 1/2 p'Bp over |p|_2 <= delta."""
    if delta <= 0:
        raise ValueError("trust-region radius must be positive")
    g = np.asarray(g, dtype=float)
    spec = spectrum(factors) if spec is None else spec
    eigs = spec.eigenvalues()
    lam_min = float(eigs.min())
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0 and lam_min >= 0.0:
        return TrSolution(np.zeros_like(g), 0.0, False, 0.0, 0.0, lam_min)

    gam = spec.gamma
    a = spec.U.T @ g
    g_perp = g - spec.U @ a if spec.has_complement else np.zeros_like(g)
    perp2 = float(g_perp @ g_perp)
    hard = False

    if lam_min > 0 and _p_norm(0.0, a, spec.lam, perp2, gam) <= delta:
        sigma = 0.0
    else:
        lo = max(0.0, -lam_min)
        # hard case: g has no weight on the lam_min eigenspace and the shifted
        # step is still interior
        tol = 1e-10 * max(1.0, abs(lam_min))
        near = np.abs(spec.lam - lam_min) <= tol
        perp_near = spec.has_complement and abs(gam - lam_min) <= tol
        weight = np.sum(a[near] ** 2) + (perp2 if perp_near else 0.0)
        if lam_min <= 0 and weight <= (1e-14 * max(gnorm, 1.0)) ** 2:
            keep = ~near
            with np.errstate(divide="ignore", invalid="ignore"):
                interior = _p_norm(lo, a[keep], spec.lam[keep], 0.0 if perp_near else perp2, gam)
            hard = interior <= delta
        if hard:
            sigma = lo
        else:
            hi = gnorm / delta - lam_min
            sigma = _secular_root(a, spec.lam, perp2, gam, delta, lo, max(hi, lo))

    if hard:
        keep = ~near
        p = -spec.U[:, keep] @ (a[keep] / (spec.lam[keep] + sigma))
        if not perp_near and perp2:
            p -= g_perp / (gam + sigma)
        if np.any(near):
            z = spec.U[:, np.flatnonzero(near)[0]]
        else:
            z = _complement_vector(spec.U)
        pz = p @ z
        tau = -pz + np.sqrt(pz**2 + delta**2 - p @ p)
        p = p + tau * z
    else:
        try:
            p = _smw_step(factors, g, gam + sigma)
        except np.linalg.LinAlgError:
            p = -spec.U @ (a / (spec.lam + sigma)) - g_perp / (gam + sigma)

    pn = float(np.linalg.norm(p))
    opt = float(np.linalg.norm(factors.matvec(p) + sigma * p + g))
    return TrSolution(p, float(sigma), bool(sigma > 0 or pn >= delta * (1 - 1e-8)), opt,
                      float(abs(sigma * (delta - pn))), lam_min)


def _complement_vector(U: np.ndarray) -> np.ndarray:
    """A unit vector orthogonal to the columns of U."""
    n = U.shape[0]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        v = e - U @ (U.T @ e)
        v -= U @ (U.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            return v / nv
    raise HardCaseUnresolved("no orthogonal complement available")


def model_value(factors: CompactFactors, g, p) -> float:
    """Q(p) = g'p + 1/2 p'Bp."""
    return float(g @ p + 0.5 * p @ factors.matvec(p))


def usable_factors(mem: CurvatureMemory) -> tuple[CompactFactors, Spectrum]:
    """Compact factors from the newest pairs whose middle matrix is invertible.

    The middle matrix is singular once S loses column rank (e.g. more pairs than
    dimensions), so oldest pairs are dropped from a snapshot until it solves.
    """
    k = min(len(mem), mem.n)
    while k > 0:
        factors = compact_rep(mem.newest(k))
        try:
            return factors, spectrum(factors)
        except Singular:
            k -= 1
    factors = CompactFactors.scaled_identity(mem.n, gamma(mem))
    return factors, spectrum(factors)


def radius_update(rho: float, delta: float, step_norm: float, cfg: TrConfig = TrConfig()) -> float:
    if not rho >= 0.25:  # also catches nan
        return delta * cfg.shrink
    if rho > 0.75 and step_norm >= 0.99 * delta:
        return min(cfg.grow * delta, cfg.delta_max)
    return delta


def reduction_ratio(f: float, f_new: float, pred: float) -> float:
    """ared / pred, shifted by a roundoff floor so that near-stationary steps whose
    actual decrease is lost in cancellation do not read as failures."""
    floor = 10.0 * np.finfo(float).eps * max(1.0, abs(f))
    return float((f - f_new + floor) / (pred + floor))


def tr_minimize(oracle: ObjectiveOracle, w0, cfg: TrConfig = TrConfig(),
                mem: CurvatureMemory | None = None):
    """Trust-region L-BFGS. Returns (w, records); rejected steps leave w unchanged.

    Every trial step contributes its (p, g(w + p) - g(w)) pair to the memory
    through the curvature filter, accepted or not.
    """
    counted = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    w = np.array(w0, dtype=float)
    mem = CurvatureMemory(w.size, cfg.memory) if mem is None else mem
    clock = Clock()
    records: list[IterationRecord] = []
    delta = cfg.delta0
    f, g = counted.eval(w)
    for k in range(cfg.max_iters):
        if np.linalg.norm(g) < cfg.grad_tol:
            break
        factors, spec = usable_factors(mem)
        sol = solve_subproblem(factors, g, delta, spec)
        pred = -model_value(factors, g, sol.p)
        if not pred > 0:
            raise NonPositivePred(f"predicted reduction {pred:g} at iteration {k}")
        f_new, g_new = counted.eval(w + sol.p)
        rho = reduction_ratio(f, f_new, pred)
        step_norm = float(np.linalg.norm(sol.p))
        used = delta
        delta = radius_update(rho, delta, step_norm, cfg)
        accepted = bool(rho > cfg.eta)
        try_accept_pair(mem, sol.p, g_new - g, cfg.eps_curv)
        if accepted:
            w = w + sol.p
            f, g = f_new, g_new
        records.append(IterationRecord(k, float(f), float(np.linalg.norm(g)), used,
                                       float(rho), accepted, counted.fevals, counted.gevals,
                                       clock.ms()))
    return w, records
