"""Command-line entry points: simulate, reconstruct, preprocess, evaluate,
info.

Configuration values come from an optional YAML file whose keys mirror the
AlgoConfig / PreprocessConfig field names; any field can be overridden by a
command-line flag of the same name. Exit codes: 0 success, 2 config error,
3 data error, 4 numerical abort.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import dataset as ds
from .core import FresnelParams, generate_scan_grid, overlap_ratio
from .driver import AlgoConfig, NumericalAbortError, run_bm_pmace
from .forward import SimParams, simulate_measurements
from .metrics import forward_nrmse, nrmse
from .phantom import make_phantom_image, make_probe_set
from .preprocess import PreprocessConfig, preprocess_measured, suggest_outliers
from .results import emit_plots, save_result

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

DEFAULT_FRESNEL = dict(wavelength_m=1.4e-10, distance_m=1.2e-3,
                       sample_spacing_m=3e-8)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(config_path, overrides: dict) -> dict:
    values = {}
    if config_path:
        try:
            loaded = yaml.safe_load(Path(config_path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            _fail(EXIT_CONFIG, f"cannot read config: {exc}")
        if not isinstance(loaded, dict):
            _fail(EXIT_CONFIG, "config file must be a mapping")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return values


def _fresnel_from_metadata(metadata: dict) -> FresnelParams:
    merged = {**DEFAULT_FRESNEL, **metadata}
    return FresnelParams(wavelength=merged["wavelength_m"],
                         distance=merged["distance_m"],
                         sample_spacing=merged["sample_spacing_m"])


@click.group()
def main():
    """Blind multi-mode ptychographic reconstruction toolkit."""


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--image-size", default=64, show_default=True)
@click.option("--patch-size", default=16, show_default=True)
@click.option("--spacing", default=4, show_default=True)
@click.option("--jitter", default=1, show_default=True)
@click.option("--modes", default=1, show_default=True)
@click.option("--energy-split", default="1.0", show_default=True,
              help="Comma-separated per-mode energy fractions.")
@click.option("--photon-rate", default=1e4, show_default=True)
@click.option("--dark-level", default=0.5, show_default=True)
@click.option("--noiseless", is_flag=True)
@click.option("--seed", default=0, show_default=True)
def simulate(out, image_size, patch_size, spacing, jitter, modes,
             energy_split, photon_rate, dark_level, noiseless, seed):
    """Generate a phantom dataset with simulated measurements."""
    try:
        split = tuple(float(s) for s in energy_split.split(","))
        if len(split) != modes:
            raise ValueError("energy-split length must equal --modes")
        image = make_phantom_image((image_size, image_size), seed=seed)
        probes = make_probe_set(patch_size, energy_split=split, seed=seed)
        grid = generate_scan_grid((image_size, image_size), patch_size,
                                  spacing, jitter, seed=seed)
        params = SimParams(photon_rate=photon_rate, dark_level=dark_level,
                           seed=seed, noiseless=noiseless)
        measurements = simulate_measurements(image, probes, grid, params)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    fresnel = _fresnel_from_metadata({})
    ds.save_dataset(out, measurements, fresnel=fresnel,
                    ground_truth_image=image, ground_truth_probes=probes)
    click.echo(f"wrote dataset with {len(grid)} locations to {out}")


@main.command()
@click.argument("data", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", type=click.Path(exists=True))
@click.option("--rho", type=float)
@click.option("--kappa", type=float)
@click.option("--alpha1", type=float)
@click.option("--alpha2", type=float)
@click.option("--max-iters", "max_iters", type=int)
@click.option("--mode-add-schedule", "mode_add_schedule",
              help="Comma-separated iteration indices.")
@click.option("--max-modes", "max_modes", type=int)
@click.option("--convergence-tol", "convergence_tol", type=float)
@click.option("--seed", type=int)
def reconstruct(data, out, config, **overrides):
    """Run the blind reconstruction on a dataset directory."""
    values = _load_config(config, overrides)
    if isinstance(values.get("mode_add_schedule"), str):
        values["mode_add_schedule"] = tuple(
            int(s) for s in values["mode_add_schedule"].split(",") if s)
    try:
        cfg = AlgoConfig(**{k: v for k, v in values.items()
                            if k in AlgoConfig.__dataclass_fields__})
    except (TypeError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        measurements, grid, metadata, truths = ds.load_dataset(data)
    except ds.DataError as exc:
        _fail(EXIT_DATA, str(exc))
    fresnel = _fresnel_from_metadata(metadata)
    try:
        result = run_bm_pmace(measurements, grid, cfg, fresnel,
                              ground_truth=truths.get("image"),
                              log=click.echo)
    except NumericalAbortError as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    save_result(result, out)
    emit_plots(result, out)
    click.echo(f"final E_c={result.e_c_trace[-1]:.6e}")
    if result.nrmse_trace is not None:
        click.echo(f"final NRMSE={result.nrmse_trace[-1]:.6e}")


@main.command()
@click.argument("data", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", type=click.Path(exists=True))
@click.option("--outlier-indices", "outlier_indices",
              help="Comma-separated frame indices to drop.")
@click.option("--crop-size", "crop_size", type=int)
@click.option("--tukey-alpha", "tukey_alpha", type=float)
@click.option("--suggest", is_flag=True,
              help="Print suggested outlier frames and exit.")
def preprocess(data, out, config, suggest, **overrides):
    """Preprocess a raw intensity dataset into amplitude measurements."""
    values = _load_config(config, overrides)
    if isinstance(values.get("outlier_indices"), str):
        values["outlier_indices"] = tuple(
            int(s) for s in values["outlier_indices"].split(",") if s)
    try:
        measurements, grid, metadata, truths = ds.load_dataset(data)
    except ds.DataError as exc:
        _fail(EXIT_DATA, str(exc))
    raw = measurements.y  # raw path stores intensities in the same container
    if suggest:
        click.echo(f"suggested outliers: {suggest_outliers(raw)}")
        return
    try:
        cfg = PreprocessConfig(**{k: v for k, v in values.items()
                                  if k in PreprocessConfig.__dataclass_fields__})
        processed = preprocess_measured(raw, truths.get("darks"), cfg, grid)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    fresnel = _fresnel_from_metadata(metadata)
    ds.save_dataset(out, processed, fresnel=fresnel)
    click.echo(f"wrote {len(processed)} preprocessed frames of "
               f"{processed.y.shape[1]}x{processed.y.shape[2]} to {out}")


@main.command()
@click.argument("result_dir", type=click.Path(exists=True))
@click.argument("data", type=click.Path(exists=True))
def evaluate(result_dir, data):
    """Report metrics for a saved reconstruction against a dataset."""
    try:
        measurements, grid, _, truths = ds.load_dataset(data)
        image = ds.load_array(Path(result_dir) / "image.ptyd").astype(np.complex128)
        probes = []
        k = 0
        while (Path(result_dir) / f"probe_{k}.ptyd").exists():
            probes.append(ds.load_array(Path(result_dir) / f"probe_{k}.ptyd"))
            k += 1
        probes = np.stack(probes).astype(np.complex128)
    except ds.DataError as exc:
        _fail(EXIT_DATA, str(exc))
    click.echo(f"forward NRMSE: "
               f"{forward_nrmse(image, probes, grid, measurements):.6f}")
    if "image" in truths:
        click.echo(f"image NRMSE: {nrmse(image, truths['image']):.6f}")
    if "probes" in truths and truths["probes"].shape == probes.shape:
        for k in range(probes.shape[0]):
            click.echo(f"probe mode {k} NRMSE: "
                       f"{nrmse(probes[k], truths['probes'][k]):.6f}")


@main.command()
@click.argument("data", type=click.Path(exists=True))
def info(data):
    """Summarize a dataset manifest."""
    try:
        measurements, grid, metadata, truths = ds.load_dataset(data)
    except ds.DataError as exc:
        _fail(EXIT_DATA, str(exc))
    click.echo(f"locations: {len(grid)}")
    click.echo(f"image: {grid.image_shape[0]}x{grid.image_shape[1]}")
    click.echo(f"patch: {grid.patch_size}x{grid.patch_size}")
    if len(grid) >= 2:
        click.echo(f"overlap ratio (diagnostic): {overlap_ratio(grid):.3f}")
    for key, value in metadata.items():
        click.echo(f"{key}: {value}")
    click.echo(f"ground truth: {sorted(truths) if truths else 'none'}")


if __name__ == "__main__":
    main()
