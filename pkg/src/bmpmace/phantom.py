"""Desk-scale synthetic ground truths: piecewise-constant complex
transmittance images and near-field probe modes formed by Fresnel
propagation of simple apertures."""

from __future__ import annotations

import numpy as np

from .core import FresnelParams, fresnel_propagate

#: Geometry used for the synthetic probes and as the CLI default.
DEFAULT_FRESNEL = FresnelParams(wavelength=1.4e-10, distance=1.2e-3,
                                sample_spacing=3e-8)


def make_phantom_image(shape=(64, 64), seed: int = 0,
                       n_rects: int = 12) -> np.ndarray:
    """Piecewise-constant complex transmittance: random rectangles with
    constant magnitude/phase over a uniform background."""
    rng = np.random.default_rng(seed)
    n1, n2 = shape
    image = np.full(shape, 0.9 + 0.0j, dtype=np.complex128)
    for _ in range(n_rects):
        h = rng.integers(n1 // 8, n1 // 2)
        w = rng.integers(n2 // 8, n2 // 2)
        r = rng.integers(0, n1 - h + 1)
        c = rng.integers(0, n2 - w + 1)
        mag = rng.uniform(0.55, 1.0)
        phase = rng.uniform(-np.pi / 3, np.pi / 3)
        image[r:r + h, c:c + w] = mag * np.exp(1j * phase)
    return image


def _radial_coords(size: int):
    x = np.arange(size) - (size - 1) / 2.0
    return np.meshgrid(x, x, indexing="ij")


def make_probe(size: int = 16, seed: int = 0, width: float = 2.5,
               fresnel: FresnelParams = DEFAULT_FRESNEL) -> np.ndarray:
    """Main probe mode: a Gaussian aperture Fresnel-propagated to the sample
    plane.

    A propagated aperture is what an illuminating beam physically looks like,
    and it is the regime the data-driven probe seed is built for: the seed
    applies the same propagator to the averaged back-transformed magnitudes,
    so its phase structure matches the true mode from the start. ``seed``
    perturbs the aperture with a fine-scale random amplitude ripple; the
    ripple keeps the far field spread out (away from the stabilized-inverse
    noise floor) and makes distinct seeds give distinct modes.
    """
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    xx, yy = _radial_coords(size)
    r2 = (xx**2 + yy**2) / (size / 2.0) ** 2
    ripple = gaussian_filter(rng.standard_normal((size, size)), 0.3,
                             mode="wrap")
    ripple /= np.abs(ripple).max()
    aperture = np.exp(-width * r2) * (1.0 + 0.6 * ripple)
    return fresnel_propagate(aperture.astype(np.complex128), fresnel)


def make_secondary_probe(size: int = 16, seed: int = 1,
                         fresnel: FresnelParams = DEFAULT_FRESNEL) -> np.ndarray:
    """Secondary mode: an odd (dipole-like) aperture with a quadratic phase,
    Fresnel-propagated; roughly orthogonal to the even main mode."""
    rng = np.random.default_rng(seed)
    xx, yy = _radial_coords(size)
    r2 = (xx**2 + yy**2) / (size / 2.0) ** 2
    amp = (xx / size) * np.exp(-2.2 * r2)
    aperture = amp * np.exp(1j * (1.5 * np.pi * r2 + rng.uniform(0, 2 * np.pi)))
    return fresnel_propagate(aperture.astype(np.complex128), fresnel)


def make_probe_set(size: int = 16, energy_split=(1.0,), seed: int = 0,
                   fresnel: FresnelParams = DEFAULT_FRESNEL) -> np.ndarray:
    """Stack of probe modes with the requested energy fractions (summing to
    the main mode's original total energy)."""
    split = np.asarray(energy_split, dtype=float)
    if split.ndim != 1 or len(split) < 1 or (split <= 0).any():
        raise ValueError("energy_split must be positive fractions")
    split = split / split.sum()
    main = make_probe(size, seed=seed, fresnel=fresnel)
    total = np.sum(np.abs(main) ** 2)
    modes = [main]
    if len(split) > 1:
        modes.append(make_secondary_probe(size, seed=seed + 1, fresnel=fresnel))
    if len(split) > 2:
        raise ValueError("at most two synthetic modes are provided")
    out = []
    for mode, frac in zip(modes, split):
        energy = np.sum(np.abs(mode) ** 2)
        out.append(mode * np.sqrt(frac * total / energy))
    return np.stack(out)
