import warnings

import pytest

from volput.model import ModelParams

# (alpha, beta, k, r, strike)
MEAN_REVERTING = (0.1, 0.1, 0.5, 0.05, 0.5)
# slow drift, strong mean reversion: the figure presets
LOW_DRIFT = (0.001, 0.2, 0.5, 0.05, 0.5)
# small B and k keep the central-difference probe below 5e-6
RESIDUAL_SETS = [
    (0.03, 0.01, 0.25, 0.01, 0.5),
    (0.04, 0.1, 0.4, 0.02, 1.0),
    (0.05, 0.02, 0.3, 0.02, 0.5),
]


def make_params(base, delta=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ModelParams(*base, delta=delta)


@pytest.fixture
def case2():
    """delta < delta* with K <= d1: the seller cancels only at the strike."""
    return make_params(MEAN_REVERTING, 0.05)


@pytest.fixture
def case1():
    """delta > delta*: cancellation never pays."""
    return make_params(MEAN_REVERTING, 0.2)


@pytest.fixture(params=[0.05, 0.01], ids=["delta0.05", "delta0.01"])
def low_drift(request):
    return make_params(LOW_DRIFT, request.param)


# one line per acceptance criterion, filled by test_acceptance and echoed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
