import numpy as np
import pytest

from cmacp.design import MEASURED, TransitionSet
from cmacp.units import mhz

ACCEPTANCE_LINES = []


@pytest.fixture
def measured():
    return MEASURED


@pytest.fixture
def symmetric():
    """Sum-rule-obeying transitions with w10 = w01 exactly halfway."""
    w00 = MEASURED.w00
    return TransitionSet(w00, w00 + mhz(28.0), w00 + mhz(28.0), w00 + mhz(56.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
