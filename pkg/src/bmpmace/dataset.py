"""Dataset container: JSON manifest plus raw little-endian array files.

Array files carry the magic ``PTYD1\\n`` followed by u32 rank, u32 dims,
a u32 dtype code (0 = float32, 1 = complex64 stored as interleaved
real/imag float32) and the row-major payload. All writes are atomic
(write to a temp file, then rename), so interrupted runs never leave
truncated files behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .core import FresnelParams, ScanGrid
from .forward import MeasurementSet

MAGIC = b"PTYD1\n"
DTYPE_F32 = 0
DTYPE_C64 = 1
MANIFEST_VERSION = "1"
THREADS_ENV_VAR = "BMPMACE_THREADS"


class DataError(Exception):
    """Base class for dataset loading failures."""


class MissingFileError(DataError):
    pass


class ShapeMismatchError(DataError):
    pass


class UnknownVersionError(DataError):
    pass


def thread_count() -> int:
    """Worker count selected by the BMPMACE_THREADS environment variable,
    defaulting to the available parallelism."""
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        n = int(value)
        if n < 1:
            raise ValueError(f"{THREADS_ENV_VAR} must be >= 1")
        return n
    return os.cpu_count() or 1


def atomic_write_bytes(path, payload: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_array(path, array: np.ndarray):
    """Write an array in the PTYD1 format (float32 or complex64)."""
    array = np.ascontiguousarray(array)
    if np.iscomplexobj(array):
        data = array.astype(np.complex64)
        code = DTYPE_C64
        payload = data.view(np.float32).astype("<f4").tobytes()
    else:
        data = array.astype("<f4")
        code = DTYPE_F32
        payload = data.tobytes()
    header = MAGIC + struct.pack("<I", data.ndim)
    header += struct.pack(f"<{data.ndim}I", *data.shape)
    header += struct.pack("<I", code)
    atomic_write_bytes(path, header + payload)


def load_array(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"array file not found: {path}")
    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise DataError(f"bad magic in {path}")
    off = len(MAGIC)
    (rank,) = struct.unpack_from("<I", blob, off)
    off += 4
    dims = struct.unpack_from(f"<{rank}I", blob, off)
    off += 4 * rank
    (code,) = struct.unpack_from("<I", blob, off)
    off += 4
    count = int(np.prod(dims))
    if code == DTYPE_F32:
        flat = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
        return flat.reshape(dims).copy()
    if code == DTYPE_C64:
        flat = np.frombuffer(blob, dtype="<f4", count=2 * count, offset=off)
        return flat.view(np.complex64).reshape(dims).copy()
    raise DataError(f"unknown dtype code {code} in {path}")


def _positions_to_anchors(positions, pixel_pitch) -> np.ndarray:
    # round-half-even, matching numpy's default rounding
    return np.round(np.asarray(positions, dtype=float) / pixel_pitch).astype(np.int64)


def save_dataset(directory, measurements: MeasurementSet,
                 fresnel: FresnelParams | None = None,
                 ground_truth_image: np.ndarray | None = None,
                 ground_truth_probes: np.ndarray | None = None,
                 dark_frames: np.ndarray | None = None) -> Path:
    """Write a dataset directory (manifest.json + array files); returns the
    manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = measurements.grid
    manifest = {
        "version": MANIFEST_VERSION,
        "image_rows": grid.image_shape[0],
        "image_cols": grid.image_shape[1],
        "patch_size": grid.patch_size,
        "anchors": grid.anchors.tolist(),
        "measurements": "measurements.ptyd",
    }
    save_array(directory / "measurements.ptyd", measurements.y)
    if fresnel is not None:
        manifest["wavelength_m"] = fresnel.wavelength
        manifest["distance_m"] = fresnel.distance
        manifest["sample_spacing_m"] = fresnel.sample_spacing
    if ground_truth_image is not None:
        manifest["ground_truth_image"] = "truth_image.ptyd"
        save_array(directory / "truth_image.ptyd", ground_truth_image)
    if ground_truth_probes is not None:
        manifest["ground_truth_probes"] = "truth_probes.ptyd"
        save_array(directory / "truth_probes.ptyd", ground_truth_probes)
    if dark_frames is not None:
        manifest["dark_frames"] = "darks.ptyd"
        save_array(directory / "darks.ptyd", dark_frames)
    path = directory / "manifest.json"
    atomic_write_bytes(path, json.dumps(manifest, indent=2).encode())
    return path


def load_dataset(path):
    """Load a dataset directory or manifest file.

    Returns (MeasurementSet, ScanGrid, metadata dict, truths dict). Physical
    scan positions, when given instead of pixel anchors, are converted using
    the declared pixel pitch.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest does not parse: {exc}") from exc
    if manifest.get("version") != MANIFEST_VERSION:
        raise UnknownVersionError(
            f"unknown manifest version {manifest.get('version')!r}")
    base = path.parent
    image_shape = (manifest["image_rows"], manifest["image_cols"])
    patch_size = manifest["patch_size"]
    if "anchors" in manifest:
        anchors = np.asarray(manifest["anchors"], dtype=np.int64)
    elif "positions_m" in manifest:
        anchors = _positions_to_anchors(manifest["positions_m"],
                                        manifest["pixel_pitch_m"])
    else:
        raise DataError("manifest declares neither anchors nor positions_m")
    grid = ScanGrid(anchors=anchors, patch_size=patch_size,
                    image_shape=image_shape)
    y = load_array(base / manifest["measurements"]).astype(np.float64)
    if y.shape != (len(grid), patch_size, patch_size):
        raise ShapeMismatchError(
            f"'measurements': expected {(len(grid), patch_size, patch_size)},"
            f" got {y.shape}")
    measurements = MeasurementSet(y=y, grid=grid)
    metadata = {k: manifest[k] for k in
                ("wavelength_m", "distance_m", "sample_spacing_m")
                if k in manifest}
    truths = {}
    if "ground_truth_image" in manifest:
        truth = load_array(base / manifest["ground_truth_image"])
        if truth.shape != image_shape:
            raise ShapeMismatchError(
                f"'ground_truth_image': expected {image_shape}, got {truth.shape}")
        truths["image"] = truth.astype(np.complex128)
    if "ground_truth_probes" in manifest:
        probes = load_array(base / manifest["ground_truth_probes"])
        if probes.ndim != 3 or probes.shape[1:] != (patch_size, patch_size):
            raise ShapeMismatchError(
                f"'ground_truth_probes': bad shape {probes.shape}")
        truths["probes"] = probes.astype(np.complex128)
    if "dark_frames" in manifest:
        truths["darks"] = load_array(base / manifest["dark_frames"])
    return measurements, grid, metadata, truths
