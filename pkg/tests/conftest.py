import numpy as np
import pytest

from entropy_flow import EnergyDensity, build_uniform_grid


@pytest.fixture
def grid02():
    return build_uniform_grid(0.0, 2.0, 200)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def linear_h(grid02):
    # 10% below the uniform-density energy of 1.0
    return EnergyDensity(grid02, grid02.nodes.copy(), 0.9)
