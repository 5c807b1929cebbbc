import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sgldscale import GlmModel, model_constants

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def logistic_small():
    model = GlmModel("logistic", np.array([0.5, -1.0, 1.5, 0.25, -0.75]), np.array([1, 0, 1, 0, 1.0]), 0.25)
    return model, model_constants(model)


@pytest.fixture
def linear_small():
    model = GlmModel("linear", np.array([1.0, -0.5, 2.0, 0.3]), np.array([1.2, 0.1, 1.7, -0.4]))
    return model, model_constants(model)
