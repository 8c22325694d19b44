import numpy as np
import pytest

from soilradar import FrequencyGrid, ViewGeometry, derive_calibration
from soilradar.simulate import simulate_plate_scan

PLATE_SIDE = 0.9
CAL_RANGES = np.linspace(6.0, 9.0, 7)


@pytest.fixture(scope="session")
def grid():
    return FrequencyGrid.linspace(n=100)


@pytest.fixture(scope="session")
def calibration(grid):
    """Seven-range plate calibration shared by the pipeline tests."""
    scans = [simulate_plate_scan(r, PLATE_SIDE) for r in CAL_RANGES]
    return derive_calibration(scans, PLATE_SIDE, grid)


@pytest.fixture
def view():
    return ViewGeometry(6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
