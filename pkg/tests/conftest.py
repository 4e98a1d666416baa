import numpy as np
import pytest

from hls_bnc.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy3():
    """Eight rows, three binary attributes and a binary class."""
    X = np.array(
        [
            [0, 0, 1],
            [0, 1, 1],
            [1, 1, 0],
            [1, 0, 0],
            [0, 0, 0],
            [1, 1, 1],
            [1, 1, 0],
            [0, 1, 1],
        ]
    )
    y = np.array([0, 0, 1, 1, 0, 1, 1, 0])
    return Dataset.from_arrays(X, y, [2, 2, 2], 2)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criteria outcomes collected by test_acceptance."""
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
