import numpy as np
import pytest

from nlskdv.operators import SystemParams, build_profiles
from nlskdv.spectral import make_grid


def random_real(rng, grid, mean_zero=False):
    s = rng.standard_normal(grid.N)
    return s - s.mean() if mean_zero else s


def random_complex(rng, grid):
    return rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)


def make_params(N=32, beta=1.0, mu=0.0, half_width=np.pi / 4, **kw):
    grid = make_grid(N)
    return SystemParams(beta, mu, build_profiles(grid, half_width=half_width), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params32():
    return make_params(32)
