import pytest

from sdelab.calculus import DensityField, build_coefficient_set
from sdelab.utils.env import set_threads


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: fine-mesh solves that take several seconds')


@pytest.fixture(autouse=True)
def single_thread():
    set_threads(1)
    yield
    set_threads(1)


@pytest.fixture
def brownian():
    """Planar Brownian motion: A = I, no drift."""
    return build_coefficient_set([['1', '0'], ['1']], H=['0', '0'], probe_points=200,
                                 name='bm')


@pytest.fixture
def ou():
    """Ornstein-Uhlenbeck, dX = -X dt + dW, invariant density exp(-|x|^2)."""
    return build_coefficient_set([['1', '0'], ['1']], H=['-x1', '-x2'], probe_points=200,
                                 name='ou')


@pytest.fixture
def gauss():
    return DensityField.analytic('exp(-norm2(x))', 2, name='gauss')


@pytest.fixture
def lebesgue():
    return DensityField.analytic('1', 2, name='lebesgue')
