"""Measured-data preprocessing: dark subtraction, outlier removal, center
cropping, radial Tukey windowing, and the amplitude-domain transform."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ScanGrid
from .dataset import thread_count
from .forward import MeasurementSet


@dataclass(frozen=True)
class PreprocessConfig:
    outlier_indices: tuple[int, ...] = ()
    crop_size: int | None = None
    tukey_alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.tukey_alpha <= 1.0:
            raise ValueError("tukey_alpha must lie in [0, 1]")
        object.__setattr__(self, "outlier_indices",
                           tuple(self.outlier_indices))


def tukey_taper(u, alpha: float):
    """Scalar Tukey taper on the half-axis: u = 0 at the window center,
    u = 1 at the edge; beyond the edge the taper is 0 (except alpha = 0,
    which is rectangular everywhere)."""
    u = np.asarray(u, dtype=float)
    if alpha == 0.0:
        return np.ones_like(u)
    flat = u <= 1.0 - alpha
    taper = (u > 1.0 - alpha) & (u <= 1.0)
    out = np.zeros_like(u)
    out[flat] = 1.0
    out[taper] = 0.5 * (1.0 + np.cos(np.pi * (u[taper] - (1.0 - alpha)) / alpha))
    return out


def tukey_window_2d(size: int, alpha: float) -> np.ndarray:
    """2D window built by evaluating the 1D Tukey taper radially from the
    array center (half-length (size-1)/2 pixels)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if size < 2:
        raise ValueError("size must be >= 2")
    center = (size - 1) / 2.0
    idx = np.arange(size) - center
    r = np.hypot(idx[:, None], idx[None, :])
    return tukey_taper(r / center, alpha)


def center_crop(frame: np.ndarray, crop_size: int) -> np.ndarray:
    """Centered crop; for odd-to-even size differences the extra row/col is
    dropped from the trailing edge."""
    n1, n2 = frame.shape
    if crop_size > n1 or crop_size > n2:
        raise ValueError(f"crop {crop_size} larger than frame {frame.shape}")
    r0 = (n1 - crop_size) // 2
    c0 = (n2 - crop_size) // 2
    return frame[r0:r0 + crop_size, c0:c0 + crop_size]


def suggest_outliers(raw: np.ndarray, n_mads: float = 5.0) -> list[int]:
    """Flag frames whose total energy deviates from the median by more than
    ``n_mads`` median absolute deviations. A suggestion for human review,
    never applied automatically."""
    energies = raw.reshape(raw.shape[0], -1).sum(axis=1)
    med = np.median(energies)
    mad = np.median(np.abs(energies - med))
    if mad == 0:
        return []
    return np.nonzero(np.abs(energies - med) > n_mads * mad)[0].tolist()


def preprocess_frames(raw: np.ndarray, darks: np.ndarray | None,
                      cfg: PreprocessConfig) -> np.ndarray:
    """Run the fixed preprocessing order on an intensity stack:
    dark-subtract, clamp negatives, drop outliers, center-crop, window,
    square root to amplitudes."""
    raw = np.asarray(raw, dtype=np.float64)
    if darks is not None and len(darks):
        darks = np.asarray(darks, dtype=np.float64)
        if darks.shape[1:] != raw.shape[1:]:
            raise ValueError("dark frames must match the raw frame shape")
        mean_dark = darks.mean(axis=0)
    else:
        mean_dark = np.zeros(raw.shape[1:])
    for idx in cfg.outlier_indices:
        if not 0 <= idx < raw.shape[0]:
            raise ValueError(f"outlier index {idx} out of range")
    keep = [j for j in range(raw.shape[0]) if j not in set(cfg.outlier_indices)]
    crop = cfg.crop_size or raw.shape[1]
    window = tukey_window_2d(crop, cfg.tukey_alpha)

    def one(j):
        frame = np.maximum(0.0, raw[j] - mean_dark)
        return np.sqrt(center_crop(frame, crop) * window)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        frames = list(pool.map(one, keep))
    return np.stack(frames)


def preprocess_measured(raw: np.ndarray, darks: np.ndarray | None,
                        cfg: PreprocessConfig,
                        grid: ScanGrid) -> MeasurementSet:
    """Preprocess a raw intensity stack into an amplitude MeasurementSet;
    outlier frames are dropped along with their scan anchors."""
    frames = preprocess_frames(raw, darks, cfg)
    keep = [j for j in range(raw.shape[0])
            if j not in set(cfg.outlier_indices)]
    kept_grid = ScanGrid(anchors=grid.anchors[keep],
                         patch_size=frames.shape[1],
                         image_shape=grid.image_shape)
    return MeasurementSet(y=frames, grid=kept_grid)
