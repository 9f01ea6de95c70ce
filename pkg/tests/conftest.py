import numpy as np
import pytest

from orlihom import (
    DoublePhase,
    ExponentWindow,
    IntegrandSpec,
    PowerRadial,
    periodic_field,
    sample_lattice_field,
)

TWO_PHASE = [(1.0, 0.5), (4.0, 0.5)]


@pytest.fixture
def two_phase_1d():
    """a in {1, 4} on the two halves of the unit cell, p = 2."""
    return IntegrandSpec(PowerRadial(periodic_field([1.0, 4.0]), 2.0), ExponentWindow(2, 2), 1.0, 4.0)


@pytest.fixture
def quadratic():
    return IntegrandSpec(PowerRadial(1.0, 2.0), ExponentWindow(2, 2), 1.0, 1.0)


@pytest.fixture
def random_quadratic_1d():
    f = sample_lattice_field(0, TWO_PHASE, dim=1)
    return IntegrandSpec(PowerRadial(f, 2.0), ExponentWindow(2, 2), 1.0, 4.0)


@pytest.fixture
def double_phase_2d():
    f = periodic_field([[1.0, 4.0], [2.0, 3.0]])
    return IntegrandSpec.from_family(DoublePhase(f, 1.0, 2.0, 3.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of every run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
