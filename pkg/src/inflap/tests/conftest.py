import numpy as np
import pytest

from ..core.grid import build_grid, build_stencil
from ..core.infinity_ops import ScalarField


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run acceptance-scale solves (257^2 grids)')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale run, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def grid33():
    return build_grid(33, 1.0)


@pytest.fixture
def stencil1():
    return build_stencil(1)


@pytest.fixture
def stencil2():
    return build_stencil(2)


def dyadic_field(grid, rng, scale=2 ** 20):
    """Random field of multiples of 2^-20, so sums and halvings stay exact."""
    n = grid.n_per_side
    return ScalarField(grid, rng.integers(-scale, scale, size=(n, n)) / scale)
