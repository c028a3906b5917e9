import numpy as np
import pytest

from swarmsde import InitSpec, SwarmParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_params():
    return SwarmParams(m=0.2, lambda1=0.4, sigma1=0.4, sigma2=1.0, alpha=10.0,
                       dt=0.01, n_particles=12, dim=3, memory="hard")


@pytest.fixture
def small_init():
    return InitSpec(position_mean=1.0, position_var=1.0, seed=7)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n = marker.args[0]
    ok = call.excinfo is None
    _CRITERIA[n] = _CRITERIA.get(n, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _CRITERIA[n] else 'FAIL'}")
