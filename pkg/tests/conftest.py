import numpy as np
import pytest

from almostinv import ApproachSchedule, ForwardShift, build_family, make_operator

# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def power_estar(dim, p=0.75):
    e = np.arange(1, dim + 1, dtype=float) ** -p
    return (e / np.linalg.norm(e)).astype(complex)


@pytest.fixture(scope="session")
def shift1024():
    return make_operator(ForwardShift(np.ones(1024)), 1024)


@pytest.fixture(scope="session")
def shift_family(shift1024):
    """lam_n = 1 + 4^-n, n = 1..6, e* = k^{-3/4} normalised, D = 1024."""
    return build_family(shift1024, 1.0, ApproachSchedule(1.0, 0.25, 6), power_estar(1024))
