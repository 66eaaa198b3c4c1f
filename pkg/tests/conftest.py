import numpy as np
import pytest

from metriplectic import rigid_body_system
from metriplectic.harness import sample_states

FIG_INERTIA = (10.0, 5.0, 1.0)
FIG_X0 = np.array([0.001, -1.0, 0.001])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def samples3():
    return sample_states(3, 100, seed=7)


@pytest.fixture(scope="session")
def relaxed_body():
    return rigid_body_system(FIG_INERTIA)


@pytest.fixture(scope="session")
def quartic_body():
    return rigid_body_system(FIG_INERTIA, entropy="quartic")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
