import numpy as np
import pytest
from hypothesis import settings

from superradiance.ensemble import SystemParams, discretize

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# acceptance verdicts collected for the terminal summary
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def params():
    return SystemParams.device_defaults()


@pytest.fixture(scope="session")
def small_ensemble(params):
    return discretize(params.distribution, params, 300)


@pytest.fixture(scope="session")
def ensemble_500(params):
    return discretize(params.distribution, params, 500)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
