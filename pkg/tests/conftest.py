import numpy as np
import pytest

from tensorprop.sptensor import COUNT, ELEMENT, Shape, SparseTensor


@pytest.fixture
def small_shape():
    return Shape((3, 3, 2, 2), (ELEMENT, ELEMENT, COUNT, COUNT))


@pytest.fixture
def small_tensor(small_shape):
    coords = [(0, 1, 0, 1), (2, 0, 1, 1), (1, 1, 0, 0), (0, 2, 1, 0)]
    return SparseTensor(small_shape, coords, [1.0, -2.0, 0.5, 3.0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
