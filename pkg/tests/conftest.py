import math

import pytest

from levelcross import Constant, ExpGap, Linear, Schedule, TSine, propagate

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def warm_jit():
    """Load or compile the numba kernels once so timed tests measure steady state."""
    s = Schedule(Linear(1.0), Constant(1.0), -1.0, 1.0)
    propagate(s, n_samples=3)
    return True


@pytest.fixture
def fig1_schedule():
    def make(sigma=2.0, omega0=1.0, kappa=0.025):
        T = 50.0 * omega0 / kappa
        return Schedule(Linear(kappa), ExpGap(omega0, sigma), -T, T, (0.0,))

    return make


@pytest.fixture
def fig3_schedule():
    def make(lam=1.0, beta=1.0):
        kappa = math.sqrt(5.0 * beta)
        T = math.sqrt(200.0 / beta)
        return Schedule(Linear(kappa), TSine(lam, beta, T), -T, T, (0.0,))

    return make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
