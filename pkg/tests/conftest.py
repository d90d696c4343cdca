import numpy as np
import pytest

from windkshmm import dataset

TWO_STATE = dataset.GaussianHmmSpec(
    transition=np.array([[0.95, 0.10], [0.05, 0.90]]),
    means=np.array([3.0, 8.0]),
    variances=np.array([1.0, 1.5]),
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def two_state_series():
    return dataset.synth_hmm_series(TWO_STATE, 700, seed=0)


@pytest.fixture(scope="session")
def short_split(two_state_series):
    """Train 120 / test 40 window, small enough for every method."""
    return dataset.split(two_state_series, dataset.SplitSpec(0, 120, 120, 40))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
