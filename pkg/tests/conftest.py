import numpy as np
import pytest

from ferrospec import Grid, Params


@pytest.fixture
def grid16():
    return Grid(16)


@pytest.fixture
def grid8():
    return Grid(8)


@pytest.fixture
def params():
    return Params(nu=1.0, sigma=0.8, tau=0.05, chi0=1.3)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
