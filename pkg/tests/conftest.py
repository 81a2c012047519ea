import numpy as np
import pytest

from hetdoa import build_angular_grid, build_dictionary, build_ula_geometry


@pytest.fixture(scope="session")
def geom20():
    return build_ula_geometry(20, 0.5)


@pytest.fixture(scope="session")
def grid_half_deg():
    return build_angular_grid(-90.0, 89.5, 0.5)


@pytest.fixture(scope="session")
def dict20(geom20, grid_half_deg):
    return build_dictionary(geom20, grid_half_deg)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
