import numpy as np
import pytest

from olslab import data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_splits():
    ds = data.gen_synthetic(data.SyntheticSpec(k=4, d=6, n_per_class=60, confusion_pairs=[(0, 1), (2, 3)], seed=3))
    return data.split(ds, data.SplitSpec(seed=3))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
