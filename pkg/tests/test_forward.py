"""Unit tests for the multi-mode forward model and Poisson simulation.

The frozen intensity values below were computed with an independent oracle
that builds the orthonormal DFT as an explicit matrix product instead of
calling the FFT.
"""

import numpy as np
import pytest

from bmpmace.core import ScanGrid, generate_scan_grid
from bmpmace.forward import (MeasurementSet, SimParams, diffraction_intensity,
                             mode_fields, noiseless_magnitude,
                             simulate_measurements)

# 3x3 image, 2x2 patch at anchor (1, 0), two modes; oracle: explicit DFT
# matrices W @ (d_k * patch) @ W.T, intensities summed over modes.
ORACLE_IMAGE = ((np.arange(9).reshape(3, 3) + 1)
                * np.exp(1j * 0.1 * np.arange(9).reshape(3, 3)))
ORACLE_MODES = np.array([
    [[0.9, 0.2j], [0.1, 0.7]],
    [[0.1, -0.3], [0.4j, 0.2]],
], dtype=complex)
ORACLE_GRID = ScanGrid(anchors=np.array([[1, 0]]), patch_size=2,
                       image_shape=(3, 3))
ORACLE_INTENSITY = np.array([
    [27.135693268032956, 3.6128776365049053],
    [5.565573967339283, 22.305855128122833],
])


class TestSimParams:
    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError, match="photon_rate"):
            SimParams(photon_rate=0.0)

    def test_rejects_negative_dark(self):
        with pytest.raises(ValueError, match="dark_level"):
            SimParams(photon_rate=1.0, dark_level=-0.1)


class TestMeasurementSet:
    def test_count_must_match_grid(self):
        grid = generate_scan_grid((8, 8), 4, 4)
        with pytest.raises(ValueError, match="one measurement per"):
            MeasurementSet(y=np.ones((1, 4, 4)), grid=grid)

    def test_shape_must_match_patch(self):
        grid = generate_scan_grid((8, 8), 4, 4)
        with pytest.raises(ValueError, match="patch size"):
            MeasurementSet(y=np.ones((len(grid), 3, 3)), grid=grid)

    def test_rejects_negative_amplitudes(self):
        grid = generate_scan_grid((8, 8), 4, 4)
        y = np.ones((len(grid), 4, 4))
        y[0, 0, 0] = -1.0
        with pytest.raises(ValueError, match="non-negative"):
            MeasurementSet(y=y, grid=grid)


class TestForwardModel:
    def test_intensity_matches_dft_matrix_oracle(self):
        intensity = diffraction_intensity(ORACLE_IMAGE, ORACLE_MODES,
                                          ORACLE_GRID, 0)
        np.testing.assert_allclose(intensity, ORACLE_INTENSITY, rtol=1e-12)

    def test_magnitude_is_root_intensity(self):
        mag = noiseless_magnitude(ORACLE_IMAGE, ORACLE_MODES, ORACLE_GRID, 0)
        np.testing.assert_allclose(mag ** 2, ORACLE_INTENSITY, rtol=1e-12)

    def test_modes_add_in_energy(self):
        both = diffraction_intensity(ORACLE_IMAGE, ORACLE_MODES, ORACLE_GRID, 0)
        separate = sum(
            diffraction_intensity(ORACLE_IMAGE, ORACLE_MODES[k:k + 1],
                                  ORACLE_GRID, 0)
            for k in range(2))
        np.testing.assert_allclose(both, separate, rtol=1e-12)

    def test_mode_fields_energy_parseval(self):
        patch = ORACLE_IMAGE[1:3, 0:2]
        fields = mode_fields(patch, ORACLE_MODES)
        assert np.sum(np.abs(fields) ** 2) == pytest.approx(
            np.sum(np.abs(ORACLE_MODES * patch[None]) ** 2), rel=1e-12)


class TestSimulateMeasurements:
    def setup_method(self):
        rng = np.random.default_rng(9)
        self.image = (rng.uniform(0.5, 1.0, (12, 12))
                      * np.exp(1j * rng.uniform(-1, 1, (12, 12))))
        self.probes = (rng.standard_normal((1, 4, 4))
                       + 1j * rng.standard_normal((1, 4, 4)))
        self.grid = generate_scan_grid((12, 12), 4, 4)

    def test_noiseless_equals_normalized_mean(self):
        params = SimParams(photon_rate=100.0, dark_level=0.5, noiseless=True)
        meas = simulate_measurements(self.image, self.probes, self.grid, params)
        intensities = np.stack([
            diffraction_intensity(self.image, self.probes, self.grid, j)
            for j in range(len(self.grid))])
        expected = 100.0 * intensities / intensities.max() + 0.5
        np.testing.assert_allclose(meas.y ** 2, expected, rtol=1e-12)

    def test_same_seed_is_identical(self):
        params = SimParams(photon_rate=1e3, dark_level=0.5, seed=4)
        a = simulate_measurements(self.image, self.probes, self.grid, params)
        b = simulate_measurements(self.image, self.probes, self.grid, params)
        np.testing.assert_array_equal(a.y, b.y)

    def test_different_seed_differs(self):
        base = SimParams(photon_rate=1e3, seed=4)
        other = SimParams(photon_rate=1e3, seed=5)
        a = simulate_measurements(self.image, self.probes, self.grid, base)
        b = simulate_measurements(self.image, self.probes, self.grid, other)
        assert (a.y != b.y).any()

    def test_per_location_streams_are_order_independent(self):
        # each location draws from its own jumped RNG stream, so its counts
        # can be reproduced in isolation from the shared normalization
        from bmpmace.forward import _location_rng

        params = SimParams(photon_rate=1e3, dark_level=0.5, seed=11)
        full = simulate_measurements(self.image, self.probes, self.grid, params)
        intensities = np.stack([
            diffraction_intensity(self.image, self.probes, self.grid, j)
            for j in range(len(self.grid))])
        means = 1e3 * intensities / intensities.max() + 0.5
        for j in (2, 0, 5):  # any order
            expected = np.sqrt(
                _location_rng(11, j).poisson(means[j]).astype(float))
            np.testing.assert_array_equal(full.y[j], expected)

    def test_zero_image_gives_dark_counts_only(self):
        params = SimParams(photon_rate=1e3, dark_level=2.0, noiseless=True)
        meas = simulate_measurements(np.zeros((12, 12), dtype=complex),
                                     self.probes, self.grid, params)
        np.testing.assert_allclose(meas.y ** 2, 2.0)
