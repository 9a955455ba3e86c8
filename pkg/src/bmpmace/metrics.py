"""Gauge-invariant reconstruction quality metrics."""

from __future__ import annotations

import numpy as np

from .core import ScanGrid
from .forward import MeasurementSet, noiseless_magnitude


def optimal_scale(estimate: np.ndarray, reference: np.ndarray) -> complex:
    """Complex gain c minimizing ||c * estimate - reference||.

    Closed form <estimate, reference> / <estimate, estimate> with the inner
    product conjugate-linear in its first argument.
    """
    denom = np.vdot(estimate, estimate)
    if denom == 0:
        raise ValueError("estimate has zero norm")
    return complex(np.vdot(estimate, reference) / denom)


def nrmse(estimate: np.ndarray, reference: np.ndarray) -> float:
    """min_c ||c * estimate - reference|| / ||reference|| over complex c,
    absorbing the global phase/scale gauge."""
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0:
        raise ValueError("reference has zero norm")
    c = optimal_scale(estimate, reference)
    return float(np.linalg.norm(c * estimate - reference) / ref_norm)


def forward_nrmse(image: np.ndarray, probes: np.ndarray, grid: ScanGrid,
                  measurements: MeasurementSet) -> float:
    """NRMSE between measured amplitudes and forward-modeled magnitudes over
    the full concatenated measurement stack. The gain is restricted to
    positive reals since both stacks are non-negative magnitudes."""
    if len(measurements) == 0:
        raise ValueError("empty measurement set")
    model = np.stack([noiseless_magnitude(image, probes, grid, j)
                      for j in range(len(grid))])
    y = measurements.y
    denom = float(np.sum(model * model))
    c = float(np.sum(model * y)) / denom if denom > 0 else 0.0
    c = max(c, 0.0)
    return float(np.linalg.norm(c * model - y) / np.linalg.norm(y))
