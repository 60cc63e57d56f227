import numpy as np
import pytest

from nsklab.fields import make_grid, random_band_limited


@pytest.fixture(scope="session")
def grid64():
    return make_grid(2, 64, 2 * np.pi, 1.0)


@pytest.fixture(scope="session")
def grid64_wide():
    return make_grid(2, 64, 4 * np.pi, 1.0)


@pytest.fixture(scope="session")
def grid3d():
    return make_grid(3, 32, 4 * np.pi, 1.0)


@pytest.fixture(scope="session")
def corpus64(grid64):
    rng = np.random.default_rng(2024)
    return [random_band_limited(grid64, rng, max_mode=int(rng.integers(2, 20))) for _ in range(20)]
