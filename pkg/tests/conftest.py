"""Shared fixtures: seeded phantoms, scan grids, and simulated measurements.

Expensive reconstructions used by several acceptance criteria are cached at
session scope so the suite runs each of them once.
"""

import numpy as np
import pytest

from bmpmace import (MeasurementSet, SimParams, generate_scan_grid,
                     noiseless_magnitude, simulate_measurements)
from bmpmace.phantom import (DEFAULT_FRESNEL, make_phantom_image,
                             make_probe_set)

IMAGE_SHAPE = (64, 64)
PATCH = 16


@pytest.fixture(scope="session")
def fresnel():
    return DEFAULT_FRESNEL


@pytest.fixture(scope="session")
def phantom_image():
    return make_phantom_image(IMAGE_SHAPE, seed=0)


@pytest.fixture(scope="session")
def single_probe():
    return make_probe_set(PATCH, (1.0,), seed=0)


@pytest.fixture(scope="session")
def two_mode_probes():
    return make_probe_set(PATCH, (0.9, 0.1), seed=0)


@pytest.fixture(scope="session")
def sparse_grid():
    """5x5 raster, J = 25, full coverage."""
    return generate_scan_grid(IMAGE_SHAPE, PATCH, 12, 0)


@pytest.fixture(scope="session")
def dense_grid():
    """Spacing-2 raster, J = 625, full coverage."""
    return generate_scan_grid(IMAGE_SHAPE, PATCH, 2, 0)


@pytest.fixture(scope="session")
def exact_sparse_measurements(phantom_image, single_probe, sparse_grid):
    """Exact (un-normalized) forward magnitudes: the algorithm's fixed point."""
    y = np.stack([noiseless_magnitude(phantom_image, single_probe,
                                      sparse_grid, j)
                  for j in range(len(sparse_grid))])
    return MeasurementSet(y=y, grid=sparse_grid)


@pytest.fixture(scope="session")
def noiseless_dense_measurements(phantom_image, single_probe, dense_grid):
    return simulate_measurements(
        phantom_image, single_probe, dense_grid,
        SimParams(photon_rate=1e4, dark_level=0.0, seed=0, noiseless=True))
