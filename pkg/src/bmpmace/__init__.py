"""Blind multi-mode ptychographic reconstruction via projected multi-agent
consensus equilibrium, with a synthetic-data simulator and quality metrics."""

from .core import (FresnelParams, ScanGrid, dft2, extract_patch,
                   fresnel_propagate, generate_scan_grid, idft2,
                   insert_patch_adjoint, overlap_ratio, stable_inverse)
from .driver import (AlgoConfig, NumericalAbortError, ReconResult,
                     add_probe_mode, init_image, init_probe,
                     rescale_probe_energy, run_bm_pmace)
from .forward import (MeasurementSet, SimParams, diffraction_intensity,
                      noiseless_magnitude, simulate_measurements)
from .image_update import (consensus_image, convergence_metric,
                           mann_image_step, patch_agent, patch_agent_mode,
                           probe_energy_weights)
from .metrics import forward_nrmse, nrmse, optimal_scale
from .preprocess import (PreprocessConfig, preprocess_measured,
                         tukey_window_2d)
from .probe_update import (consensus_probe, mann_probe_step, probe_agent,
                           probe_agent_mode)

__all__ = [
    "AlgoConfig", "FresnelParams", "MeasurementSet", "NumericalAbortError",
    "PreprocessConfig", "ReconResult", "ScanGrid", "SimParams",
    "add_probe_mode", "consensus_image", "consensus_probe",
    "convergence_metric", "dft2", "diffraction_intensity", "extract_patch",
    "forward_nrmse", "fresnel_propagate", "generate_scan_grid", "idft2",
    "init_image", "init_probe", "insert_patch_adjoint", "mann_image_step",
    "mann_probe_step", "noiseless_magnitude", "nrmse", "optimal_scale",
    "overlap_ratio", "patch_agent", "patch_agent_mode",
    "preprocess_measured", "probe_agent", "probe_agent_mode",
    "probe_energy_weights", "rescale_probe_energy", "run_bm_pmace",
    "simulate_measurements", "stable_inverse", "tukey_window_2d",
]

__version__ = "0.1.0"
