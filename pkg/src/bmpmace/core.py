"""Shared numerical substrate: patch operators, scan grids, orthonormal FFTs,
stabilized inversion, and Fresnel propagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STABLE_EPS_FACTOR = 1e-6


@dataclass(frozen=True)
class FresnelParams:
    """Physical parameters of near-field propagation (all in meters)."""

    wavelength: float
    distance: float
    sample_spacing: float

    def __post_init__(self):
        for name in ("wavelength", "distance", "sample_spacing"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ScanGrid:
    """Ordered list of integer patch anchors (top-left corners) on an image.

    Every anchor must place a ``patch_size`` x ``patch_size`` patch fully
    inside ``image_shape``; out-of-bounds anchors are rejected here, not at
    extraction time.
    """

    anchors: np.ndarray  # (J, 2) int, (row, col)
    patch_size: int
    image_shape: tuple[int, int]

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=np.int64)
        if anchors.ndim != 2 or anchors.shape[1] != 2 or anchors.shape[0] < 1:
            raise ValueError("anchors must be a (J, 2) array with J >= 1")
        object.__setattr__(self, "anchors", anchors)
        n1, n2 = self.image_shape
        np_ = self.patch_size
        if np_ < 1 or np_ > n1 or np_ > n2:
            raise ValueError("patch does not fit inside the image")
        if (anchors < 0).any():
            raise ValueError("negative anchor")
        if (anchors[:, 0] > n1 - np_).any() or (anchors[:, 1] > n2 - np_).any():
            raise ValueError("anchor places patch out of bounds")

    def __len__(self):
        return self.anchors.shape[0]


def extract_patch(image: np.ndarray, grid: ScanGrid, j: int) -> np.ndarray:
    """Extract the j-th patch of ``image`` as a copy (no aliasing)."""
    if not 0 <= j < len(grid):
        raise IndexError(f"patch index {j} out of range [0, {len(grid)})")
    r, c = grid.anchors[j]
    n = grid.patch_size
    return image[r : r + n, c : c + n].copy()


def extract_all_patches(image: np.ndarray, grid: ScanGrid) -> np.ndarray:
    """Stack all J patches of ``image`` into a (J, Np, Np) array."""
    return np.stack([extract_patch(image, grid, j) for j in range(len(grid))])


def insert_patch_adjoint(patch: np.ndarray, grid: ScanGrid, j: int,
                         accumulator: np.ndarray) -> np.ndarray:
    """Add ``patch`` into ``accumulator`` at anchor j (adjoint of extraction).

    Mutates and returns the accumulator; repeated calls accumulate.
    """
    n = grid.patch_size
    if patch.shape != (n, n):
        raise ValueError(f"patch shape {patch.shape} != ({n}, {n})")
    if accumulator.shape != grid.image_shape:
        raise ValueError("accumulator shape does not match the grid image shape")
    r, c = grid.anchors[j]
    accumulator[r : r + n, c : c + n] += patch
    return accumulator


def overlap_add(patches: np.ndarray, grid: ScanGrid, dtype=None) -> np.ndarray:
    """Sum_j P_j^T patches[j] into a fresh image-sized array."""
    if dtype is None:
        dtype = patches.dtype
    acc = np.zeros(grid.image_shape, dtype=dtype)
    for j in range(len(grid)):
        insert_patch_adjoint(patches[j], grid, j, acc)
    return acc


def generate_scan_grid(image_shape, patch_size, nominal_spacing, jitter_range=0,
                       seed=None) -> ScanGrid:
    """Rectangular raster of anchors with independent uniform integer jitter.

    Anchors are clamped so every patch stays in bounds; deterministic per seed.
    """
    if nominal_spacing <= 0:
        raise ValueError("nominal_spacing must be positive")
    n1, n2 = image_shape
    if patch_size > n1 or patch_size > n2:
        raise ValueError("patch larger than image")
    rows = np.arange(0, n1 - patch_size + 1, nominal_spacing)
    cols = np.arange(0, n2 - patch_size + 1, nominal_spacing)
    if rows.size == 0 or cols.size == 0:
        raise ValueError("no valid anchor positions")
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    anchors = np.stack([rr.ravel(), cc.ravel()], axis=1)
    if jitter_range > 0:
        rng = np.random.default_rng(seed)
        anchors = anchors + rng.integers(-jitter_range, jitter_range + 1,
                                         size=anchors.shape)
        anchors[:, 0] = np.clip(anchors[:, 0], 0, n1 - patch_size)
        anchors[:, 1] = np.clip(anchors[:, 1], 0, n2 - patch_size)
    return ScanGrid(anchors=anchors, patch_size=patch_size,
                    image_shape=tuple(image_shape))


def overlap_ratio(grid: ScanGrid) -> float:
    """Diagnostic overlap fraction: 1 - mean nearest-neighbor anchor distance
    over the patch size, clamped to [0, 1]. Never used by the solver."""
    if len(grid) < 2:
        raise ValueError("overlap_ratio needs at least two anchors")
    a = grid.anchors.astype(float)
    d2 = np.sum((a[:, None, :] - a[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    nn = np.sqrt(d2.min(axis=1)).mean()
    return float(np.clip(1.0 - nn / grid.patch_size, 0.0, 1.0))


def dft2(field: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DFT (Parseval-preserving, DC at index (0, 0))."""
    return np.fft.fft2(field, norm="ortho")


def idft2(field: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft2`."""
    return np.fft.ifft2(field, norm="ortho")


def stable_inverse(d: np.ndarray, energy_scale: float | None = None) -> np.ndarray:
    """Numerically stable element-wise inverse d* / (|d|^2 + eps).

    eps is 1e-6 * sqrt(mean |d|^2), or derived from ``energy_scale``
    (a total squared norm) when given. An all-zero input returns all zeros.
    """
    d = np.asarray(d)
    if energy_scale is None:
        energy_scale = float(np.sum(np.abs(d) ** 2))
    eps = STABLE_EPS_FACTOR * np.sqrt(energy_scale / d.size)
    if eps == 0.0:
        eps = np.finfo(np.float64).tiny
    return np.conj(d) / (np.abs(d) ** 2 + eps)


def safe_reciprocal(w: np.ndarray, rel_threshold: float = 1e-12) -> np.ndarray:
    """Exact reciprocal of a non-negative weight image, 0 where uncovered.

    Entries below ``rel_threshold`` times the max are treated as uncovered.
    Exactness where covered keeps consensus averaging idempotent.
    """
    w = np.asarray(w, dtype=np.float64)
    wmax = w.max() if w.size else 0.0
    covered = w > rel_threshold * wmax
    out = np.zeros_like(w)
    np.divide(1.0, w, out=out, where=covered)
    return out


def fresnel_propagate(field: np.ndarray, params: FresnelParams) -> np.ndarray:
    """Propagate a square field by the transfer-function (angular-spectrum,
    Fresnel approximation) method. The constant global phase is dropped, so
    the operator is exactly energy-preserving."""
    n = field.shape[0]
    if field.shape != (n, n):
        raise ValueError("field must be square")
    f = np.fft.fftfreq(n, d=params.sample_spacing)
    fu, fv = np.meshgrid(f, f, indexing="ij")
    h = np.exp(-1j * np.pi * params.wavelength * params.distance * (fu**2 + fv**2))
    return np.fft.ifft2(np.fft.fft2(field) * h)
