import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from monret import distributions as d
from monret import spectral as sp

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FAMILIES = {
    "fixed": d.Fixed(0.7),
    "exponential": d.Exponential(1.3),
    "uniform": d.Uniform(0.3, 1.1),
    "gamma": d.Gamma(2.0, 2.0),
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tls():
    return sp.two_level(1.0)


@pytest.fixture(params=sorted(FAMILIES))
def family(request):
    return FAMILIES[request.param]


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
