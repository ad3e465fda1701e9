import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hsc.params import derived_coefficients

settings.register_profile(
    "hsc", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("hsc")


@pytest.fixture
def p0():
    return derived_coefficients(alpha_i=1.0, alpha_o=2.0, gamma_i=0.0, gamma_o=1.0, sigma=1.0, R=2.0)


@pytest.fixture
def p0_coriolis(p0):
    return p0.replace(beta_i=0.5, beta_o=1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
