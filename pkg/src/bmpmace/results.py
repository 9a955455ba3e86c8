"""Result emission: complex array dumps, 8-bit previews, trace files, and
convergence plots."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .dataset import atomic_write_bytes, save_array
from .driver import ReconResult


def magnitude_to_uint8(field: np.ndarray) -> np.ndarray:
    mag = np.abs(field)
    peak = mag.max()
    if peak == 0:
        return np.zeros(field.shape, dtype=np.uint8)
    return np.round(mag / peak * 255).astype(np.uint8)


def phase_to_uint8(field: np.ndarray) -> np.ndarray:
    """Map phase in (-pi, pi] linearly onto [0, 255]."""
    phase = np.angle(field)
    return np.round((phase + np.pi) / (2 * np.pi) * 255).astype(np.uint8)


def _write_png(path, pixels: np.ndarray):
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def trace_csv(result: ReconResult) -> str:
    lines = ["iteration,modes,e_c" + (",nrmse" if result.nrmse_trace is not None
                                      else "")]
    for i in range(result.iterations):
        row = f"{i + 1},{result.k_trace[i]},{result.e_c_trace[i]:.12e}"
        if result.nrmse_trace is not None:
            row += f",{result.nrmse_trace[i]:.12e}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def parse_trace_csv(text: str) -> dict[str, np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    cols = np.asarray(rows, dtype=float).T
    return {name: cols[i] for i, name in enumerate(header)}


def save_result(result: ReconResult, out_dir) -> Path:
    """Write the reconstructed arrays, preview images, and traces."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_array(out_dir / "image.ptyd", result.image)
    _write_png(out_dir / "image_magnitude.png", magnitude_to_uint8(result.image))
    _write_png(out_dir / "image_phase.png", phase_to_uint8(result.image))
    for k, mode in enumerate(result.probes):
        save_array(out_dir / f"probe_{k}.ptyd", mode)
        _write_png(out_dir / f"probe_{k}_magnitude.png", magnitude_to_uint8(mode))
        _write_png(out_dir / f"probe_{k}_phase.png", phase_to_uint8(mode))
    atomic_write_bytes(out_dir / "traces.csv", trace_csv(result).encode())
    return out_dir


def emit_plots(result: ReconResult, out_dir) -> Path:
    """Render convergence-curve images from the iteration traces."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    iters = np.arange(1, result.iterations + 1)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(iters, result.e_c_trace)
    ax.set_xlabel("iteration")
    ax.set_ylabel("consensus residual")
    fig.tight_layout()
    fig.savefig(out_dir / "convergence_e_c.png", dpi=120)
    plt.close(fig)

    if result.nrmse_trace is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.semilogy(iters, result.nrmse_trace)
        ax.set_xlabel("iteration")
        ax.set_ylabel("NRMSE")
        fig.tight_layout()
        fig.savefig(out_dir / "convergence_nrmse.png", dpi=120)
        plt.close(fig)
    return out_dir
