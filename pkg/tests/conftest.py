import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def osc():
    from cosymred.scenarios import load_scenario
    return load_scenario("oscillator-moving-observer")


@pytest.fixture(scope="session")
def wave():
    from cosymred.scenarios import load_scenario
    return load_scenario("plane-wave")


@pytest.fixture(scope="session")
def qtrans():
    from cosymred.scenarios import load_scenario
    return load_scenario("q-translation")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
