import numpy as np
import pytest

from nwpeval.grids import N_CHANNELS, GridSpec, StateSet
from nwpeval.synthetic import default_time, make_state


@pytest.fixture
def small_grid():
    # 9x16 global grid at 22.5 degrees, poles included
    return GridSpec(nlat=9, nlon=16, lat_start=90.0, dlat=22.5,
                    lon_start=0.0, dlon=22.5)


@pytest.fixture
def coarse_grid():
    # 2.5-degree global grid, 73x144
    return GridSpec(nlat=73, nlon=144, lat_start=90.0, dlat=2.5,
                    lon_start=0.0, dlon=2.5)


@pytest.fixture
def small_state(small_grid):
    return make_state(small_grid, seed=7, source_label="test")


def random_state(grid: GridSpec, seed: int, label: str = "rand") -> StateSet:
    """Unconstrained random values (not physically plausible)."""
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((N_CHANNELS, grid.nlat, grid.nlon)).astype(np.float32)
    return StateSet(valid_time=default_time(), source_label=label,
                    grid=grid, data=data)
