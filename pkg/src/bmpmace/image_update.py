"""Image-side consensus machinery: per-patch data-fitting agents, the
pixel- and mode-weighted averaging operator, and the Mann relaxation step."""

from __future__ import annotations

import warnings

import numpy as np

from .core import (ScanGrid, dft2, extract_all_patches, idft2, overlap_add,
                   safe_reciprocal, stable_inverse)
from .forward import MeasurementSet, mode_fields


def probe_energy_weights(probes: np.ndarray) -> np.ndarray:
    """Per-mode weights proportional to total mode energy; they sum to 1."""
    energies = np.sum(np.abs(probes) ** 2, axis=(1, 2))
    total = energies.sum()
    if total <= 0:
        raise ValueError("probe set has zero total energy")
    weights = energies / total
    # pin the last weight so the set sums to 1 exactly
    weights[-1] = 1.0 - weights[:-1].sum()
    return weights


def _magnitude_ratio(y: np.ndarray, fields: np.ndarray) -> np.ndarray:
    """y over the stabilized combined far-field magnitude."""
    denom = np.sqrt(np.sum(np.abs(fields) ** 2, axis=0))
    return y * stable_inverse(denom).real


def patch_agent_mode(v_j: np.ndarray, probes: np.ndarray, k: int,
                     y_j: np.ndarray) -> np.ndarray:
    """Probe-dependent patch refinement for mode k: replace the modeled
    magnitude with the measured one, back-transform, and divide out the
    probe via its stabilized inverse."""
    fields = mode_fields(v_j, probes)
    ratio = _magnitude_ratio(y_j, fields)
    return stable_inverse(probes[k]) * idft2(ratio * fields[k])


def patch_agent(v_j: np.ndarray, probes: np.ndarray, y_j: np.ndarray,
                alpha1: float) -> np.ndarray:
    """Relaxed patch agent: (1 - a1) v_j + a1 * sum_k w_k v~_{j,k}."""
    fields = mode_fields(v_j, probes)
    ratio = _magnitude_ratio(y_j, fields)
    weights = probe_energy_weights(probes)
    refined = np.zeros_like(v_j)
    for k in range(probes.shape[0]):
        refined += weights[k] * (stable_inverse(probes[k]) * idft2(ratio * fields[k]))
    return (1.0 - alpha1) * v_j + alpha1 * refined


def apply_patch_agents(v: np.ndarray, probes: np.ndarray,
                       measurements: MeasurementSet, alpha1: float) -> np.ndarray:
    """Apply the patch agent independently at every scan location."""
    return np.stack([patch_agent(v[j], probes, measurements.y[j], alpha1)
                     for j in range(v.shape[0])])


def consensus_image(stack: np.ndarray, probes: np.ndarray, grid: ScanGrid,
                    kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the pixel- and mode-weighted average image and re-extract it.

    Returns (full image, projected patch stack). Pixels covered by no patch
    (or only zero probe weight) are set to 0 with a warning.
    """
    weights = probe_energy_weights(probes)
    full = np.zeros(grid.image_shape, dtype=np.complex128)
    coverage = np.zeros(grid.image_shape)
    for k in range(probes.shape[0]):
        pw = np.abs(probes[k]) ** kappa
        numerator = overlap_add(pw[None] * stack, grid, dtype=np.complex128)
        lam = overlap_add(np.broadcast_to(pw, stack.shape), grid,
                          dtype=np.float64)
        full += weights[k] * safe_reciprocal(lam) * numerator
        coverage += weights[k] * lam
    if (coverage <= 0).any():
        warnings.warn("consensus image has uncovered pixels; set to 0",
                      stacklevel=2)
    return full, extract_all_patches(full, grid)


def convergence_metric(w: np.ndarray, z: np.ndarray) -> float:
    """Consensus residual (1/J) ||z - w||_2 over the full patch stack."""
    if w.shape != z.shape:
        raise ValueError("patch stacks must have identical shapes")
    return float(np.linalg.norm(z - w) / w.shape[0])


def mann_image_step(v: np.ndarray, probes: np.ndarray,
                    measurements: MeasurementSet, grid: ScanGrid,
                    alpha1: float, kappa: float, rho: float):
    """One Mann relaxation of the image patch stack.

    w <- F(v); z <- G(2w - v); v <- v + 2 rho (z - w). Returns (v', w, z);
    z is also the consensus transmittance stack the probe side consumes.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    w = apply_patch_agents(v, probes, measurements, alpha1)
    _, z = consensus_image(2.0 * w - v, probes, grid, kappa)
    v_next = v + 2.0 * rho * (z - w)
    return v_next, w, z
