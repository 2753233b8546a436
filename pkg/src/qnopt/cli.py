"""Command-line harness: `qnopt run`, `qnopt probe-bound`, `qnopt timing`."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bench import TIMING_METHODS, probe_bound, timing_compare
from .errors import ConfigError, DataError, StepTooLarge
from .linesearch import DriverConfig, WolfeParams, ls_minimize
from .multibatch import sgd_minimize
from .problems.data import DATA_ENV, load_mnist, synthetic_digits
from .problems.functions import Rosenbrock, make_logistic, make_quadratic
from .problems.mlp import MlpSpec, mlp_oracle
from .problems.oracle import CountingOracle
from .records import Clock, write_csv
from .rl import QLearnConfig, default_gridworld, optimal_actions, train_qlearning, value_iteration
from .rl.qlearn import greedy_policy
from .trustregion import TrConfig, tr_minimize

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 2, 3, 4
TASKS = ("quadratic", "rosenbrock", "logistic", "mnist", "gridworld")
METHODS = ("ls-lbfgs", "tr-lbfgs", "sgd")
# used when neither a flag nor the config file sets the value
TASK_DEFAULTS = {"gridworld": {"b": 128, "max_iters": 600}}


@dataclass
class RunConfig:
    task: str = "rosenbrock"
    method: str = "ls-lbfgs"
    m: int = 20
    b: int = 64
    lr: float = 0.1
    seed: int = 0
    max_iters: int = 200
    grad_tol: float = 1e-5
    n_samples: int = 1000
    hidden: int = 64
    data_dir: str | None = None
    out: str = "qnopt-out"
    wall_clock: bool = False

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}")
        if self.task == "gridworld" and self.method != "ls-lbfgs":
            raise ConfigError("gridworld trains with multi-batch ls-lbfgs only")
        if min(self.m, self.b, self.max_iters, self.n_samples, self.hidden) <= 0:
            raise ConfigError("m, b, max-iters, n-samples and hidden must be positive")
        if self.lr < 0:
            raise ConfigError("lr must be nonnegative")
        if not self.grad_tol > 0:
            raise ConfigError("grad-tol must be positive")


def _coerce(name: str, raw):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError as exc:
        raise ConfigError(f"{name.replace('_', '-')}: cannot parse {raw!r}") from exc
    if name == "data_dir" and raw in ("", None):
        return None
    return raw


def read_config_file(path) -> dict:
    """key = value lines; '#' starts a comment; keys may use dashes or underscores."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        given = getattr(args, f.name, None)
        if given is not None:
            values[f.name] = _coerce(f.name, given)
    for key, value in TASK_DEFAULTS.get(values.get("task", RunConfig.task), {}).items():
        values.setdefault(key, value)
    cfg = RunConfig(**values)
    if cfg.data_dir is None and os.environ.get(DATA_ENV):
        cfg.data_dir = os.environ[DATA_ENV]
    cfg.validate()
    return cfg


def _classification_data(cfg: RunConfig):
    if cfg.data_dir:
        return (load_mnist(cfg.data_dir, "train", cfg.n_samples),
                load_mnist(cfg.data_dir, "test", cfg.n_samples), "mnist")
    return synthetic_digits(cfg.n_samples, cfg.seed), synthetic_digits(cfg.n_samples, cfg.seed + 1), "synthetic"


def _build(cfg: RunConfig):
    """(oracle, w0, extras) for a supervised or analytic task."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.task == "quadratic":
        q = make_quadratic(20, 1.0, 10.0, cfg.seed, n_samples=cfg.n_samples, noise=1.0)
        return q, rng.standard_normal(q.dim), {}
    if cfg.task == "rosenbrock":
        return Rosenbrock(), np.array([-1.2, 1.0]), {}
    if cfg.task == "logistic":
        lg = make_logistic(n_samples=cfg.n_samples, seed=cfg.seed)
        return lg, np.zeros(lg.dim), {}
    train, test, source = _classification_data(cfg)
    oracle = mlp_oracle(MlpSpec((train.inputs.shape[1], cfg.hidden, train.n_classes)), train)
    return oracle, oracle.init_params(cfg.seed), {"test": test, "data_source": source}


def _run_supervised(cfg: RunConfig):
    oracle, w0, extras = _build(cfg)
    initial_loss = oracle.loss(w0)
    counted = CountingOracle(oracle)
    if cfg.method == "ls-lbfgs":
        w, records = ls_minimize(counted, w0, DriverConfig(cfg.grad_tol, cfg.max_iters, cfg.m), WolfeParams())
    elif cfg.method == "tr-lbfgs":
        w, records = tr_minimize(counted, w0, TrConfig(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters,
                                                       memory=cfg.m))
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            w, records = sgd_minimize(counted, w0, cfg.lr, min(cfg.b, oracle.n_samples), cfg.max_iters, cfg.seed)
    final_loss, final_grad = oracle.eval(w)
    summary = {
        "initial_loss": float(initial_loss),
        "final_loss": float(final_loss),
        "final_grad_norm": float(np.linalg.norm(final_grad)),
        "iterations": len(records),
        "fevals": counted.fevals,
        "gevals": counted.gevals,
    }
    converged = summary["final_grad_norm"] < cfg.grad_tol
    if cfg.method != "sgd":
        summary["converged"] = converged
    tables = {}
    if cfg.task in ("logistic", "mnist"):
        summary["train_accuracy"] = float(oracle.accuracy(w))
    if cfg.task == "mnist":
        test = extras["test"]
        summary["test_accuracy"] = float(oracle.accuracy(w, test))
        summary["test_loss"] = float(oracle.dataset_loss(w, test))
        summary["generalization_gap"] = summary["test_loss"] - summary["final_loss"]
        summary["data_source"] = extras["data_source"]
        tables["losses.csv"] = (("split", "loss", "accuracy"),
                                [("train", summary["final_loss"], summary["train_accuracy"]),
                                 ("test", summary["test_loss"], summary["test_accuracy"])])
    not_converged = cfg.method != "sgd" and not converged
    return records, summary, tables, not_converged


def _run_gridworld(cfg: RunConfig):
    env = default_gridworld()
    result = train_qlearning(env, QLearnConfig(b=cfg.b, m=cfg.m, opt_steps=cfg.max_iters, seed=cfg.seed))
    q_star = value_iteration(env)
    policy = greedy_policy(result.qfn)
    live = env.nonterminal_states()
    matched = sum(int(policy[s]) in optimal_actions(q_star, s) for s in live)
    summary = {
        "iterations": len(result.records),
        "best_eval_score": max(e.mean_return for e in result.evals),
        "final_value_gap": result.evals[-1].value_gap,
        "policy_matches": matched,
        "nonterminal_states": len(live),
    }
    tables = {"evals.csv": (("step", "mean_return", "value_gap"), [tuple(e) for e in result.evals])}
    return result.records, summary, tables, False


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])


def _write_summary(path: Path, summary: dict) -> None:
    text = json.dumps(summary, indent=2, sort_keys=True)
    if json.dumps(json.loads(text), indent=2, sort_keys=True) != text:
        raise RuntimeError("summary does not round-trip through JSON")
    path.write_text(text + "\n")


def run(cfg: RunConfig) -> int:
    clock = Clock()
    if cfg.task == "gridworld":
        records, summary, tables, not_converged = _run_gridworld(cfg)
    else:
        records, summary, tables, not_converged = _run_supervised(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "records.csv", records, wall_clock=cfg.wall_clock)
    for name, (header, rows) in tables.items():
        _write_table(out / name, header, rows)
    (out / "config.echo").write_text("".join(f"{k} = {v}\n" for k, v in sorted(asdict(cfg).items())))
    summary.update(task=cfg.task, method=cfg.method, seed=cfg.seed, wall_ms=clock.ms())
    _write_summary(out / "summary.json", summary)
    return EXIT_NOT_CONVERGED if not_converged else EXIT_OK


def _probe(args) -> int:
    batch = args.b if args.b else None
    try:
        report = probe_bound(args.lam, args.Lam, args.alpha, args.iters, args.n, args.m, batch, seed=args.seed)
    except StepTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "offsets.csv", ("iter", "offset", "bound"),
                 [(k, float(o), float(b)) for k, (o, b) in enumerate(zip(report.offsets, report.bound))])
    summary = {k: float(v) if not isinstance(v, bool) else v for k, v in report._asdict().items()
               if k not in ("offsets", "bound")}
    summary.update(final_offset=float(report.offsets[-1]), batch=batch)
    _write_summary(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _timing(args) -> int:
    rows = timing_compare(tuple(args.methods), tuple(args.batch_sizes), tuple(args.m_values), args.iters,
                          args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ("method", "b", "m", "iters", "wall_ms", "fevals", "gevals")
    if not args.wall_clock:
        rows = [r._replace(wall_ms=0.0) for r in rows]
    _write_table(out / "timing.csv", header, rows)
    for r in rows:
        print(f"{r.method:9s} b={r.b:<5d} m={r.m:<3d} iters={r.iters} fevals={r.fevals} "
              f"gevals={r.gevals} wall_ms={r.wall_ms:.1f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qnopt", description="L-BFGS line-search / trust-region toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="optimize one task and write records.csv, summary.json, config.echo")
    r.add_argument("--task", choices=TASKS)
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--m", type=int)
    r.add_argument("--b", type=int)
    r.add_argument("--lr", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--max-iters", dest="max_iters", type=int)
    r.add_argument("--grad-tol", dest="grad_tol", type=float)
    r.add_argument("--n-samples", dest="n_samples", type=int)
    r.add_argument("--hidden", type=int)
    r.add_argument("--data-dir", dest="data_dir", help=f"MNIST IDX directory (or ${DATA_ENV})")
    r.add_argument("--config", help="key = value file; explicit flags override it")
    r.add_argument("--out")
    r.add_argument("--wall-clock", dest="wall_clock", action="store_const", const=True,
                   help="keep real wall_ms in records.csv (otherwise 0 for byte-identical reruns)")

    p = sub.add_parser("probe-bound", help="fixed-step L-BFGS offset decay on a strongly convex quadratic")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--Lam", type=float, default=10.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=60)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--b", type=int, default=0, help="batch size; 0 means full batch")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="qnopt-probe")

    t = sub.add_parser("timing", help="oracle counters and wall time for a fixed iteration budget")
    t.add_argument("--methods", nargs="+", default=list(TIMING_METHODS), choices=TIMING_METHODS)
    t.add_argument("--batch-sizes", dest="batch_sizes", nargs="+", type=int, default=[128, 256])
    t.add_argument("--m-values", dest="m_values", nargs="+", type=int, default=[5, 20])
    t.add_argument("--iters", type=int, default=200)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="qnopt-timing")
    t.add_argument("--wall-clock", dest="wall_clock", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "probe-bound":
            return _probe(args)
        if args.command == "timing":
            return _timing(args)
        cfg = resolve_config(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
