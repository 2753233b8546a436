"""Q-learning driven by multi-batch line-search L-BFGS on experience memories.

Each optimization step consumes one full memory D of b transitions. D is the
overlap set O_k: its loss is combined with the loss of the previous memory
O_{k-1} (targets frozen as they were then), the curvature pair differences
the O_k gradient at two parameter points, and D is then emptied.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..direction import two_loop
from ..errors import ConfigError, EmptyBatch
from ..linesearch import WolfeParams, first_step_scale, wolfe_search
from ..memory import EPS_CURV, CurvatureMemory, try_accept_pair
from ..multibatch import combined_gradient
from ..problems.mlp import Mlp, MlpSpec
from ..problems.oracle import CountingOracle, ObjectiveOracle
from ..records import Clock, IterationRecord
from .gridworld import Gridworld, value_iteration

EVAL_EPSILON = 0.05


class Experience(NamedTuple):
    s: int
    a: int
    r: float
    s_next: int
    terminal: bool


class ExperienceMemory:
    """The transition buffer D; it fills to capacity b and is then consumed whole."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ConfigError("memory capacity must be positive")
        self.capacity = capacity
        self.items: list[Experience] = []

    def add(self, e: Experience) -> None:
        if self.full:
            raise ConfigError("experience memory is full; optimize and clear it first")
        self.items.append(e)

    @property
    def full(self) -> bool:
        return len(self.items) >= self.capacity

    def clear(self) -> None:
        self.items = []

    def __len__(self) -> int:
        return len(self.items)


class QFunction:
    """One-hot state encoding fed to an MLP (or a single linear layer when hidden=())."""

    def __init__(self, n_states: int, n_actions: int, hidden: tuple[int, ...] = (32,), seed: int = 0):
        self.n_states = n_states
        self.n_actions = n_actions
        self.net = Mlp(MlpSpec((n_states, *hidden, n_actions)))
        self.dim = self.net.n_params
        self.w = self.net.init_params(seed) * 0.1
        self.w_lagged = self.w.copy()

    def encode(self, states) -> np.ndarray:
        return np.eye(self.n_states)[np.asarray(states, dtype=int)]

    def values(self, states, w=None) -> np.ndarray:
        out, _ = self.net.forward(self.w if w is None else w, self.encode(states))
        return out

    def table(self, w=None) -> np.ndarray:
        return self.values(np.arange(self.n_states), w)

    def snapshot(self) -> None:
        self.w_lagged = self.w.copy()


def eps_greedy(q_row, epsilon: float, rng: np.random.Generator) -> int:
    """Greedy with probability 1 - epsilon (ties to the lowest index), else uniform."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q_row = np.asarray(q_row)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return int(np.argmax(q_row))


def epsilon_schedule(step: int, total_anneal: int, start: float = 1.0, end: float = 0.1) -> float:
    if step < 0:
        raise ValueError("step must be nonnegative")
    if total_anneal <= 0 or step >= total_anneal:
        return end
    return start + (end - start) * step / total_anneal


def td_targets(batch, qfn: QFunction, discount: float, w_lagged=None) -> np.ndarray:
    """r + discount * max_a' Q(s', a'; w_lagged), with terminal transitions bootstrapping to 0."""
    w_lagged = qfn.w_lagged if w_lagged is None else w_lagged
    rewards = np.array([e.r for e in batch], dtype=float)
    live = np.array([not e.terminal for e in batch])
    targets = rewards.copy()
    if live.any() and discount != 0.0:
        nxt = qfn.values([e.s_next for e, ok in zip(batch, live) if ok], w_lagged)
        targets[live] += discount * nxt.max(axis=1)
    return targets


def bellman_risk_grad(batch, w, targets, qfn: QFunction) -> tuple[float, np.ndarray]:
    """Semi-gradient of (1/2|D|) sum (Y - Q(s, a; w))^2 with the targets Y held fixed."""
    if len(batch) == 0:
        raise EmptyBatch("no transitions to evaluate")
    states = np.array([e.s for e in batch])
    actions = np.array([e.a for e in batch])
    out, acts = qfn.net.forward(w, qfn.encode(states))
    rows = np.arange(len(batch))
    resid = np.asarray(targets, dtype=float) - out[rows, actions]
    dout = np.zeros_like(out)
    dout[rows, actions] = -resid / len(batch)
    return float(0.5 * np.mean(resid**2)), qfn.net.backward(w, acts, dout)


class BellmanOracle(ObjectiveOracle):
    """Frozen-target Bellman risk over one memory, exposed as an ordinary objective."""

    def __init__(self, batch, targets, qfn: QFunction):
        if len(batch) == 0:
            raise EmptyBatch("no transitions to evaluate")
        self.batch = list(batch)
        self.targets = np.asarray(targets, dtype=float)
        self.qfn = qfn
        self.dim = qfn.dim
        self.n_samples = len(self.batch)

    def eval_batch(self, w, idx):
        if idx is None:
            return bellman_risk_grad(self.batch, w, self.targets, self.qfn)
        idx = np.asarray(idx, dtype=int)
        return bellman_risk_grad([self.batch[i] for i in idx], w, self.targets[idx], self.qfn)


class _Combined(ObjectiveOracle):
    """L^{J_k} = (L^{O_{k-1}} + L^{O_k}) / 2; its gradient is combined_gradient of the parts."""

    def __init__(self, prev: ObjectiveOracle | None, curr: ObjectiveOracle):
        self.prev, self.curr = prev, curr
        self.dim = curr.dim

    def eval_batch(self, w, idx):
        f, g = self.curr.eval(w)
        if self.prev is None:
            return f, g
        fp, gp = self.prev.eval(w)
        return 0.5 * (fp + f), combined_gradient(gp, g)


def value_gap(qfn: QFunction, q_star: np.ndarray, states=None) -> float:
    """max |Q(s, a; w) - Q*(s, a)| over the given (default: all) states and every action."""
    table = qfn.table()
    states = np.arange(len(q_star)) if states is None else np.asarray(states, dtype=int)
    return float(np.abs(table[states] - q_star[states]).max())


def greedy_policy(qfn: QFunction) -> np.ndarray:
    return qfn.table().argmax(axis=1)


@dataclass
class QLearnConfig:
    b: int = 128
    m: int = 20
    opt_steps: int = 600
    anneal_steps: int | None = None  # environment steps; default: half the budget
    wolfe: WolfeParams = field(default_factory=WolfeParams)
    seed: int = 0
    hidden: tuple[int, ...] = (32,)
    max_episode_len: int = 50
    eval_every: int = 10
    eval_episodes: int = 20
    grad_tol: float = 1e-8
    eps_curv: float = EPS_CURV

    def __post_init__(self):
        if self.b <= 0 or self.m <= 0 or self.opt_steps <= 0 or self.max_episode_len <= 0:
            raise ConfigError("b, m, opt_steps and max_episode_len must be positive")
        if self.wolfe.alpha_min < 0.1 or self.wolfe.alpha_init > 1.0:
            raise ConfigError("step sizes must stay within [0.1, 1]")


class EvalScore(NamedTuple):
    step: int
    mean_return: float
    value_gap: float


class QLearnResult(NamedTuple):
    qfn: QFunction
    records: list[IterationRecord]
    evals: list[EvalScore]
    mem: CurvatureMemory


def evaluate(env: Gridworld, qfn: QFunction, episodes: int, max_len: int, rng: np.random.Generator,
             epsilon: float = EVAL_EPSILON) -> float:
    """Mean undiscounted return of eps-greedy rollouts from random non-terminal starts."""
    starts = env.nonterminal_states()
    table = qfn.table()
    total = 0.0
    for _ in range(episodes):
        s = starts[rng.integers(len(starts))]
        for _ in range(max_len):
            s, r, done = env.step(s, eps_greedy(table[s], epsilon, rng))
            total += r
            if done:
                break
    return total / episodes


def train_qlearning(env: Gridworld, cfg: QLearnConfig = QLearnConfig(), callback=None) -> QLearnResult:
    rng = np.random.default_rng(cfg.seed)
    eval_rng = np.random.default_rng([cfg.seed, 1])
    qfn = QFunction(env.n_states, env.n_actions, cfg.hidden, cfg.seed)
    mem = CurvatureMemory(qfn.dim, cfg.m)
    D = ExperienceMemory(cfg.b)
    q_star = value_iteration(env)
    live = env.nonterminal_states()
    anneal = cfg.anneal_steps if cfg.anneal_steps is not None else cfg.opt_steps * cfg.b // 2
    clock = Clock()
    records: list[IterationRecord] = []
    evals: list[EvalScore] = []
    prev: BellmanOracle | None = None
    fevals = gevals = 0
    env_steps = 0
    s, t = live[rng.integers(len(live))], 0

    for k in range(cfg.opt_steps):
        while not D.full:
            a = eps_greedy(qfn.values([s])[0], epsilon_schedule(env_steps, anneal), rng)
            s_next, r, done = env.step(s, a)
            D.add(Experience(s, a, r, s_next, done))
            env_steps += 1
            t += 1
            if done or t >= cfg.max_episode_len:
                s, t = live[rng.integers(len(live))], 0
            else:
                s = s_next

        curr = CountingOracle(BellmanOracle(D.items, td_targets(D.items, qfn, env.discount), qfn))
        prev_counted = None if prev is None else CountingOracle(prev)
        objective = _Combined(prev_counted, curr)
        f, g = objective.eval(qfn.w)
        gnorm = float(np.linalg.norm(g))
        alpha, ok = 0.0, False
        w_old = qfn.w
        if gnorm > cfg.grad_tol:
            p = two_loop(mem, g)
            if not mem:
                p *= first_step_scale(g)
            alpha, ok, f, _ = wolfe_search(objective, qfn.w, p, f, g, cfg.wolfe)
            w_new = qfn.w + alpha * p
            _, g_curr_old = curr.eval(qfn.w)
            _, g_curr_new = curr.eval(w_new)
            try_accept_pair(mem, alpha * p, g_curr_new - g_curr_old, cfg.eps_curv)
            qfn.w = w_new
        fevals += curr.fevals + (prev_counted.fevals if prev_counted else 0)
        gevals += curr.gevals + (prev_counted.gevals if prev_counted else 0)
        prev = curr.inner
        D.clear()
        qfn.w_lagged = w_old.copy()

        records.append(IterationRecord(k, float(f), gnorm, alpha, None, ok, fevals, gevals, clock.ms()))
        if (k + 1) % cfg.eval_every == 0 or k + 1 == cfg.opt_steps:
            score = evaluate(env, qfn, cfg.eval_episodes, cfg.max_episode_len, eval_rng)
            evals.append(EvalScore(k, score, value_gap(qfn, q_star, live)))
        if callback is not None:
            callback(k, qfn, mem)
    return QLearnResult(qfn, records, evals, mem)
