import numpy as np
import pytest

from fvqe.problem import MaxCutProblem


@pytest.fixture(scope="session")
def problems():
    """A few small random instances, built once."""
    return {n: [MaxCutProblem.random(n, seed=10 * n + k) for k in range(3)] for n in (3, 5, 7)}


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
