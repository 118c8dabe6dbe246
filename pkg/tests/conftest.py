import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from birkspec.map_model import BranchSystem, discretize_analytic

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def doubling():
    return BranchSystem.doubling()


@pytest.fixture(scope="session")
def digit1(doubling):
    return discretize_analytic(doubling, {"id": "digit_indicator", "j": 1}, 1)


@pytest.fixture(scope="session")
def mp():
    return BranchSystem.manneville_pomeau(0.5)


@pytest.fixture(scope="session")
def mp_x(mp):
    return discretize_analytic(mp, {"id": "coordinate"}, 1)


@pytest.fixture(scope="session")
def dp():
    return BranchSystem.double_parabolic(0.5)


@pytest.fixture(scope="session")
def dp_pair(dp):
    return discretize_analytic(dp, [{"id": "coordinate"}, {"id": "affine", "a": -1.0, "b": 1.0}], 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
