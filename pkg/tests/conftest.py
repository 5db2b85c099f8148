import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from halfheat.grid import GridSpec, build_grid

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(GridSpec(n=3, R=4.0, cells_per_axis=12, grading=0.8))


@pytest.fixture(scope="session")
def uniform_grid():
    return build_grid(GridSpec(n=3, R=4.0, cells_per_axis=10))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
