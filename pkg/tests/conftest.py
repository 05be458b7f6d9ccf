import numpy as np
import pytest

from doubletaxis.grid import Grid2D


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def grid8():
    return Grid2D.square(8)
