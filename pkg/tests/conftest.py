import numpy as np
import pytest

from qnopt.memory import CurvatureMemory, try_accept_pair


def random_spd(rng, n, cond=100.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.geomspace(1.0, cond, n)) @ q.T


def random_memory(rng, n, k, m=None, cond=100.0):
    """Memory filled by offering k pairs y = A s (+ a little noise) through the acceptance filter."""
    a = random_spd(rng, n, cond)
    mem = CurvatureMemory(n, m if m is not None else k)
    for _ in range(k):
        s = rng.standard_normal(n)
        y = a @ s + 0.01 * rng.standard_normal(n)
        try_accept_pair(mem, s, y)
    return mem


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
