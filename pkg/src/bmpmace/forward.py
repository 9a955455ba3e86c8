"""Multi-mode far-field forward model and Poisson measurement simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScanGrid, dft2, extract_patch


@dataclass(frozen=True)
class SimParams:
    """Measurement simulation parameters: photon count scale, dark level,
    RNG seed, and the test-only noiseless switch (Poisson replaced by its
    mean)."""

    photon_rate: float
    dark_level: float = 0.0
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if self.photon_rate <= 0:
            raise ValueError("photon_rate must be positive")
        if self.dark_level < 0:
            raise ValueError("dark_level must be non-negative")


@dataclass
class MeasurementSet:
    """Amplitude-domain measurements (counts^1/2), one per scan anchor."""

    y: np.ndarray  # (J, Np, Np) real, >= 0
    grid: ScanGrid

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim != 3 or self.y.shape[0] != len(self.grid):
            raise ValueError("need one measurement per scan anchor")
        if self.y.shape[1:] != (self.grid.patch_size,) * 2:
            raise ValueError("measurement shape does not match patch size")
        if (self.y < 0).any():
            raise ValueError("amplitude measurements must be non-negative")

    def __len__(self):
        return self.y.shape[0]


def mode_fields(patch: np.ndarray, probes: np.ndarray) -> np.ndarray:
    """Far-field complex fields of each probe mode: dft2(d_k * patch)."""
    return dft2(probes * patch[None, :, :])


def diffraction_intensity(image: np.ndarray, probes: np.ndarray,
                          grid: ScanGrid, j: int) -> np.ndarray:
    """Noiseless detector intensity at location j; modes add in energy."""
    patch = extract_patch(image, grid, j)
    return np.sum(np.abs(mode_fields(patch, probes)) ** 2, axis=0)


def noiseless_magnitude(image: np.ndarray, probes: np.ndarray,
                        grid: ScanGrid, j: int) -> np.ndarray:
    """Square root of :func:`diffraction_intensity`."""
    return np.sqrt(diffraction_intensity(image, probes, grid, j))


def _location_rng(seed: int, j: int) -> np.random.Generator:
    # Counter-based Philox stream jumped per location: locations can be
    # sampled in any order or in parallel with identical results.
    return np.random.Generator(np.random.Philox(key=seed).jumped(j))


def simulate_measurements(image: np.ndarray, probes: np.ndarray,
                          grid: ScanGrid, params: SimParams) -> MeasurementSet:
    """Simulate y_j = sqrt(Pois(r_p * I_j / max_i ||I_i||_inf + dark)).

    The normalization scalar is the max intensity over the whole scan,
    computed before any sampling.
    """
    j_count = len(grid)
    intensities = np.stack([diffraction_intensity(image, probes, grid, j)
                            for j in range(j_count)])
    peak = intensities.max()
    if peak <= 0:
        means = np.full_like(intensities, params.dark_level)
    else:
        means = params.photon_rate * intensities / peak + params.dark_level
    if params.noiseless:
        counts = means
    else:
        counts = np.stack([
            _location_rng(params.seed, j).poisson(means[j]).astype(np.float64)
            for j in range(j_count)
        ])
    return MeasurementSet(y=np.sqrt(counts), grid=grid)
