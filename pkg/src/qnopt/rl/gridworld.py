"""Deterministic gridworld MDPs and a tabular value-iteration oracle."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

ACTIONS = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

DEFAULT_MAP = """\
....G
.#.P.
.#...
...#.
.....
"""


@dataclass(frozen=True)
class Gridworld:
    """Walls block, the goal pays +1 and pits -1 (both terminal); bumping a wall or edge is a no-op."""

    width: int
    height: int
    walls: frozenset = field(default_factory=frozenset)
    goal: tuple[int, int] = (0, 0)
    pits: frozenset = field(default_factory=frozenset)
    step_reward: float = 0.0
    discount: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError("discount must lie in (0, 1]")
        cells = [(r, c) for r in range(self.height) for c in range(self.width) if (r, c) not in self.walls]
        object.__setattr__(self, "cells", tuple(cells))
        object.__setattr__(self, "index", {cell: i for i, cell in enumerate(cells)})
        if self.goal not in self.index:
            raise ConfigError("goal must be a floor cell inside the grid")
        if not self._goal_reachable():
            raise ConfigError("goal is unreachable from some floor cell")

    @classmethod
    def from_text(cls, text: str, step_reward: float = 0.0, discount: float = 0.95) -> "Gridworld":
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if not rows or len({len(r) for r in rows}) != 1:
            raise ConfigError("map rows must be nonempty and of equal length")
        walls, pits, goals = set(), set(), []
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == "#":
                    walls.add((r, c))
                elif ch == "P":
                    pits.add((r, c))
                elif ch == "G":
                    goals.append((r, c))
                elif ch != ".":
                    raise ConfigError(f"unknown map symbol {ch!r}")
        if len(goals) != 1:
            raise ConfigError("map needs exactly one goal")
        return cls(len(rows[0]), len(rows), frozenset(walls), goals[0], frozenset(pits),
                   step_reward, discount)

    @property
    def n_states(self) -> int:
        return len(self.cells)

    @property
    def n_actions(self) -> int:
        return len(ACTIONS)

    def is_terminal(self, s: int) -> bool:
        cell = self.cells[s]
        return cell == self.goal or cell in self.pits

    def nonterminal_states(self) -> list[int]:
        return [s for s in range(self.n_states) if not self.is_terminal(s)]

    def step(self, s: int, a: int) -> tuple[int, float, bool]:
        r, c = self.cells[s]
        dr, dc = MOVES[a]
        nxt = (r + dr, c + dc)
        if nxt not in self.index:
            nxt = (r, c)
        s_next = self.index[nxt]
        if nxt == self.goal:
            return s_next, 1.0, True
        if nxt in self.pits:
            return s_next, -1.0, True
        return s_next, self.step_reward, False

    def _goal_reachable(self) -> bool:
        seen = {self.goal}
        queue = deque([self.goal])
        while queue:
            r, c = queue.popleft()
            for dr, dc in MOVES:
                nxt = (r + dr, c + dc)
                if nxt in self.index and nxt not in seen and nxt not in self.pits:
                    seen.add(nxt)
                    queue.append(nxt)
        return len(seen) + len(self.pits) == len(self.cells)


def default_gridworld(discount: float = 0.95) -> Gridworld:
    return Gridworld.from_text(DEFAULT_MAP, discount=discount)


def value_iteration(env: Gridworld, tol: float = 1e-12, max_sweeps: int = 10_000) -> np.ndarray:
    """Q*(s, a) by Bellman optimality sweeps; rows of terminal states stay 0."""
    q = np.zeros((env.n_states, env.n_actions))
    table = [[env.step(s, a) for a in range(env.n_actions)] for s in range(env.n_states)]
    live = env.nonterminal_states()
    for _ in range(max_sweeps):
        v = q.max(axis=1)
        new = np.zeros_like(q)
        for s in live:
            for a, (s2, r, done) in enumerate(table[s]):
                new[s, a] = r + (0.0 if done else env.discount * v[s2])
        delta = np.abs(new - q).max()
        q = new
        if delta < tol:
            break
    return q


def optimal_actions(q_star: np.ndarray, s: int, tol: float = 1e-9) -> set[int]:
    """All actions within tol of the best value; several shortest routes give ties."""
    row = q_star[s]
    return set(np.flatnonzero(row >= row.max() - tol).tolist())
