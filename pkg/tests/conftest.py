import sys
from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings

from henonlab.radial import ProblemParams
from henonlab.shooting import find_beta0, separatrix

settings.register_profile(
    "henonlab",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("henonlab")


@lru_cache(maxsize=None)
def shot(N, alpha):
    """Shooting result shared across test modules."""
    return find_beta0(ProblemParams(N, float(alpha)))


@lru_cache(maxsize=None)
def sep(N, alpha, r_target):
    return separatrix(shot(N, alpha), float(r_target))


@pytest.fixture(scope="session")
def cached():
    class Cache:
        shoot = staticmethod(shot)
        separatrix = staticmethod(sep)

    return Cache


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
