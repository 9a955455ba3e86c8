"""Probe-side consensus machinery: per-location probe agents, the simple
averaging operator, and the Mann relaxation step for one mode's stack."""

from __future__ import annotations

import numpy as np

from .core import dft2, idft2, stable_inverse
from .forward import MeasurementSet


def probe_agent_mode(d_jk: np.ndarray, all_modes_at_j: np.ndarray,
                     z_j: np.ndarray, y_j: np.ndarray) -> np.ndarray:
    """Data-fitting refinement of mode k's estimate at one location.

    ``all_modes_at_j`` holds the current local estimates of every mode at
    this location (mode k included); ``z_j`` is the consensus transmittance
    patch playing the role of the diagonal object operator.
    """
    fields = dft2(z_j[None, :, :] * all_modes_at_j)
    denom = np.sqrt(np.sum(np.abs(fields) ** 2, axis=0))
    ratio = y_j * stable_inverse(denom).real
    field_k = dft2(z_j * d_jk)
    return stable_inverse(z_j) * idft2(ratio * field_k)


def probe_agent(d_jk: np.ndarray, all_modes_at_j: np.ndarray, z_j: np.ndarray,
                y_j: np.ndarray, alpha2: float) -> np.ndarray:
    """Relaxed probe agent: (1 - a2) d_{j,k} + a2 * d~_{j,k}."""
    return (1.0 - alpha2) * d_jk + alpha2 * probe_agent_mode(
        d_jk, all_modes_at_j, z_j, y_j)


def consensus_probe(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average the J local estimates of one mode (fixed ascending-j order)
    and replicate the mean back to every location."""
    mean = stack.mean(axis=0)
    return mean, np.broadcast_to(mean, stack.shape).copy()


def mann_probe_step(s_k: np.ndarray, k: int, all_stacks: list[np.ndarray],
                    z: np.ndarray, measurements: MeasurementSet,
                    alpha2: float, rho: float):
    """One Mann relaxation of mode k's probe stack.

    r_k <- F(s_k; s_*, z); u_k <- G(2 r_k - s_k); s_k <- s_k + 2 rho (u_k - r_k).
    ``all_stacks`` carries every mode's CURRENT stack (lower modes already
    updated this iteration). Returns (s_k', u_k, r_k); u_k's replicate is the
    probe used by the next image update.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    j_count = s_k.shape[0]
    r_k = np.stack([
        probe_agent(s_k[j], np.stack([s[j] for s in all_stacks]), z[j],
                    measurements.y[j], alpha2)
        for j in range(j_count)
    ])
    _, u_k = consensus_probe(2.0 * r_k - s_k)
    s_next = s_k + 2.0 * rho * (u_k - r_k)
    return s_next, u_k, r_k
