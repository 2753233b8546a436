"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line (printed in the pytest terminal summary)
before asserting, so a failure is reported rather than hidden.
"""
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from qnopt.bench import probe_bound
from qnopt.direction import two_loop
from qnopt.linesearch import DriverConfig, WolfeParams, ls_minimize
from qnopt.memory import (CurvatureMemory, bfgs_dense, compact_rep, hessian_inverse_dense,
                          try_accept_pair)
from qnopt.multibatch import CostParams, cost_ratio, sgd_minimize
from qnopt.problems.data import synthetic_digits
from qnopt.problems.functions import Rosenbrock, make_logistic, make_quadratic
from qnopt.problems.lenet import LENET5, param_count
from qnopt.problems.mlp import MlpSpec, mlp_oracle
from qnopt.problems.oracle import check_gradient
from qnopt.rl import (BellmanOracle, Experience, QFunction, QLearnConfig, default_gridworld,
                      optimal_actions, td_targets, train_qlearning, value_iteration)
from qnopt.rl.qlearn import greedy_policy
from qnopt.trustregion import TrConfig, model_value, solve_subproblem, tr_minimize

from conftest import ACCEPTANCE_LINES, random_spd
from oracles import dense_tr_solve, model


def report(number, title, ok, detail, elapsed, budget):
    within = elapsed < budget
    line = (f"[{'PASS' if ok and within else 'FAIL'}] criterion {number:2d} {title}: {detail} "
            f"({elapsed:.2f}s, budget {budget:g}s)")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def seeded_memory(seed, n_max=64, m_max=8):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    a = random_spd(rng, n, cond=10.0 ** rng.uniform(0, 4))
    mem = CurvatureMemory(n, m)
    for _ in range(int(rng.integers(1, 2 * m + 1))):
        s = rng.standard_normal(n)
        try_accept_pair(mem, s, a @ s + 0.05 * rng.standard_normal(n))
    return rng, mem


def test_01_compact_fidelity():
    t = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        _, mem = seeded_memory(seed)
        if not mem:
            continue
        B = bfgs_dense(mem)
        worst = max(worst, np.linalg.norm(compact_rep(mem).dense() - B) / np.linalg.norm(B))
    report(1, "compact representation fidelity", worst <= 1e-9, f"max rel Frobenius error {worst:.2e}",
           time.perf_counter() - t, 5)


def test_02_two_loop_matches_dense_inverse():
    t = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        rng, mem = seeded_memory(seed)
        g = rng.standard_normal(mem.n)
        ref = -hessian_inverse_dense(mem) @ g
        worst = max(worst, np.linalg.norm(two_loop(mem, g) - ref) / np.linalg.norm(ref))
    report(2, "two-loop oracle equivalence", worst <= 1e-10, f"max rel error {worst:.2e}",
           time.perf_counter() - t, 5)


def test_03_trust_region_subproblem():
    t = time.perf_counter()
    worst_cert, worst_model, n_boundary, n_interior = 0.0, -np.inf, 0, 0
    for seed in range(100):
        rng, mem = seeded_memory(1000 + seed)
        factors = compact_rep(mem)
        B = factors.dense()
        g = rng.standard_normal(mem.n)
        newton = np.linalg.norm(np.linalg.solve(B, g))
        # half the instances put delta beyond the Newton step, half inside it
        delta = newton * (10.0 ** rng.uniform(0.05, 1) if seed % 2 else 10.0 ** rng.uniform(-3, -0.05))
        sol = solve_subproblem(factors, g, delta)
        pn = np.linalg.norm(sol.p)
        n_boundary += sol.on_boundary
        n_interior += not sol.on_boundary
        cert = max(
            np.linalg.norm((B + sol.sigma * np.eye(mem.n)) @ sol.p + g) / max(1.0, np.linalg.norm(g)),
            abs(sol.sigma * (delta - pn)) / max(1.0, delta),
            max(0.0, pn - delta) / delta,
            max(0.0, -(np.linalg.eigvalsh(B).min() + sol.sigma)),
            max(0.0, -sol.sigma),
        )
        worst_cert = max(worst_cert, cert)
        q_ref = model(B, g, dense_tr_solve(B, g, delta))
        worst_model = max(worst_model, abs(model_value(factors, g, sol.p) - q_ref))
    ok = worst_cert <= 1e-6 and worst_model <= 1e-6 and n_boundary > 0 and n_interior > 0
    report(3, "trust-region subproblem optimality", ok,
           f"max certificate residual {worst_cert:.2e}, max |Q - Q_ref| {worst_model:.2e}, "
           f"{n_interior} interior / {n_boundary} boundary", time.perf_counter() - t, 10)


def test_04_secant_and_positive_definite():
    t = time.perf_counter()
    worst_secant, min_eig, checked = 0.0, np.inf, 0
    for seed in range(500):
        rng = np.random.default_rng(5000 + seed)
        n = int(rng.integers(2, 30))
        mem = CurvatureMemory(n, int(rng.integers(1, 9)))
        last = None
        for _ in range(int(rng.integers(1, 15))):
            s = rng.standard_normal(n)
            # arbitrary pairs, including nonconvex ones the filter must reject
            y = rng.standard_normal(n) + rng.uniform(-1, 3) * s
            if try_accept_pair(mem, s, y):
                last = (s, y)
        if last is None:
            continue
        B = bfgs_dense(mem)
        s, y = last
        worst_secant = max(worst_secant, np.linalg.norm(B @ s - y) / np.linalg.norm(y))
        min_eig = min(min_eig, np.linalg.eigvalsh(B).min())
        checked += 1
    report(4, "secant condition and positive definiteness", worst_secant <= 1e-10 and min_eig > 0,
           f"{checked} sequences, max rel secant error {worst_secant:.2e}, min eigenvalue {min_eig:.2e}",
           time.perf_counter() - t, 10)


def test_05_lenet_parameter_count():
    t = time.perf_counter()
    count = param_count(LENET5)
    report(5, "LeNet-5 parameter count", count == 431_080, f"{count}", time.perf_counter() - t, 1)


def test_06_rosenbrock_both_drivers():
    t = time.perf_counter()
    f = Rosenbrock()
    w0 = np.array([-1.2, 1.0])
    w_ls, r_ls = ls_minimize(f, w0, DriverConfig(1e-5, 200, 20))
    w_tr, r_tr = tr_minimize(f, w0, TrConfig(grad_tol=1e-5, max_iters=200, memory=20))
    g_ls, g_tr = (np.linalg.norm(f.eval(w)[1]) for w in (w_ls, w_tr))
    e_ls, e_tr = (np.abs(w - 1.0).max() for w in (w_ls, w_tr))
    ok = g_ls < 1e-5 and g_tr < 1e-5 and e_ls <= 1e-4 and e_tr <= 1e-4 and len(r_ls) <= 200 and len(r_tr) <= 200
    report(6, "Rosenbrock", ok,
           f"ls: {len(r_ls)} iters |g|={g_ls:.1e} err={e_ls:.1e}; tr: {len(r_tr)} iters |g|={g_tr:.1e} "
           f"err={e_tr:.1e}", time.perf_counter() - t, 1)


SGD_TUNING_GRID = (0.5, 0.1, 0.05)


def test_07_desk_scale_classification():
    t = time.perf_counter()
    oracle = mlp_oracle(MlpSpec((784, 64, 10)), synthetic_digits(1000, seed=0))
    w0 = oracle.init_params(0)
    w_ls, _ = ls_minimize(oracle, w0, DriverConfig(1e-5, 200, 20))
    w_tr, _ = tr_minimize(oracle, w0, TrConfig(grad_tol=1e-5, max_iters=200, memory=20))
    acc_ls, acc_tr = oracle.accuracy(w_ls), oracle.accuracy(w_tr)
    with np.errstate(over="ignore", invalid="ignore"):
        acc_sgd1 = oracle.accuracy(sgd_minimize(oracle, w0, 1.0, 64, 200, 0)[0])
        tuned = {lr: oracle.accuracy(sgd_minimize(oracle, w0, lr, 64, 200, 0)[0]) for lr in SGD_TUNING_GRID}
    best_lr = max(tuned, key=tuned.get)
    ok = acc_ls >= 0.9 and acc_tr >= 0.9 and acc_sgd1 < 0.9 and tuned[best_lr] >= 0.9
    report(7, "desk-scale classification", ok,
           f"ls {acc_ls:.3f}, tr {acc_tr:.3f}, sgd lr=1 {acc_sgd1:.3f}, sgd lr={best_lr:g} {tuned[best_lr]:.3f}",
           time.perf_counter() - t, 300)


def test_08_convergence_bound_probe():
    t = time.perf_counter()
    full = probe_bound(lam=1.0, Lam=10.0, alpha=1.0, iters=60)
    noisy = probe_bound(lam=1.0, Lam=10.0, alpha=1.0, iters=60, batch=16)
    ok = full.offsets[-1] < 1e-12 and full.rate < 1.0 and full.bound_holds and noisy.plateau > 0
    report(8, "convergence-bound probe", ok,
           f"full-batch final offset {full.offsets[-1]:.1e} (rate {full.rate:.3f}), "
           f"subsampled plateau {noisy.plateau:.3e}", time.perf_counter() - t, 10)


def test_09_cost_model():
    t = time.perf_counter()
    r = cost_ratio(CostParams(2048, 32, 4, 5, 20))
    report(9, "cost model", abs(r - 0.6299) <= 5e-4, f"{r:.5f}", time.perf_counter() - t, 1)


def test_10_gridworld_qlearning():
    t = time.perf_counter()
    env = default_gridworld(0.95)
    q_star = value_iteration(env)
    live = env.nonterminal_states()
    matched, gaps = 0, []
    for seed in range(5):
        res = train_qlearning(env, QLearnConfig(b=128, m=20, seed=seed))
        policy = greedy_policy(res.qfn)
        matched += all(policy[s] in optimal_actions(q_star, s) for s in live)
        gaps.append(res.evals[-1].value_gap)
    ok = matched >= 4 and max(gaps) < 0.25
    report(10, "gridworld Q-learning", ok,
           f"{matched}/5 seeds match the optimal policy, final value gaps "
           f"{', '.join(f'{g:.3f}' for g in gaps)}", time.perf_counter() - t, 120)


def test_11_gradient_fidelity():
    t = time.perf_counter()
    rng = np.random.default_rng(11)
    env = default_gridworld()
    qfn = QFunction(env.n_states, env.n_actions, seed=0)
    batch = []
    for _ in range(64):
        s = int(rng.choice(env.nonterminal_states()))
        a = int(rng.integers(4))
        batch.append(Experience(s, a, *env.step(s, a)))
    oracles = {
        "quadratic": make_quadratic(30, 1.0, 100.0, seed=0),
        "logistic": make_logistic(dim=30, seed=0),
        "mlp": mlp_oracle(MlpSpec((784, 16, 10)), synthetic_digits(64, seed=0)),
        "bellman": BellmanOracle(batch, td_targets(batch, qfn, env.discount), qfn),
    }
    worst = {}
    for name, oracle in oracles.items():
        errs = []
        for _ in range(5):
            w = rng.standard_normal(oracle.dim) * (0.1 if name in ("mlp", "bellman") else 1.0)
            errs.append(check_gradient(oracle, w, rng.choice(oracle.dim, 20, replace=False)))
        worst[name] = max(errs)
    report(11, "gradient fidelity", max(worst.values()) <= 1e-5,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), time.perf_counter() - t, 30)


CLI_RUNS = (
    ("rosenbrock", "ls-lbfgs"),
    ("logistic", "tr-lbfgs"),
    ("quadratic", "sgd"),
    ("mnist", "ls-lbfgs"),
)


def test_12_cli_determinism(tmp_path):
    t = time.perf_counter()
    env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1", MKL_NUM_THREADS="1")
    env.pop("QNOPT_DATA_DIR", None)
    same = []
    for task, method in CLI_RUNS:
        files = []
        for rep in ("a", "b"):
            out = tmp_path / f"{task}-{method}-{rep}"
            subprocess.run([sys.executable, "-m", "qnopt.cli", "run", "--task", task, "--method", method,
                            "--seed", "3", "--out", str(out)], env=env, check=False, capture_output=True)
            files.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        same.append(bool(files[0]) and files[0] == files[1])
    report(12, "CLI determinism", all(same),
           ", ".join(f"{t_}/{m}: {'identical' if s else 'DIFFERENT'}" for (t_, m), s in zip(CLI_RUNS, same)),
           time.perf_counter() - t, 300)
