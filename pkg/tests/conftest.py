import numpy as np
import pytest

from intertwine import spectral as sp


@pytest.fixture
def grid16():
    return sp.Grid(16)


@pytest.fixture
def grid8():
    return sp.Grid(8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
