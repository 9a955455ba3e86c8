"""Unit tests for initialization, mode addition, and the reconstruction loop."""

import numpy as np
import pytest

from bmpmace.core import extract_all_patches
from bmpmace.driver import (AlgoConfig, ReconResult, add_probe_mode,
                            init_image, init_probe, rescale_probe_energy,
                            run_bm_pmace, total_probe_energy)
from bmpmace.forward import SimParams, simulate_measurements
from bmpmace.metrics import nrmse
from bmpmace.phantom import DEFAULT_FRESNEL, make_probe_set


class TestAlgoConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(rho=0.0), dict(rho=1.0), dict(kappa=0.5), dict(kappa=2.5),
        dict(alpha1=-0.1), dict(alpha2=1.5),
        dict(mode_add_schedule=(20, 10)), dict(mode_add_schedule=(5, 5)),
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            AlgoConfig(**kwargs)

    def test_defaults_are_valid(self):
        cfg = AlgoConfig()
        assert cfg.rho == 0.5 and cfg.kappa == 1.25
        assert cfg.alpha1 == 0.6 and cfg.alpha2 == 0.6


class TestInitialization:
    def test_init_probe_shape_and_energy(self, exact_sparse_measurements,
                                         sparse_grid, fresnel):
        d0 = init_probe(exact_sparse_measurements, sparse_grid, fresnel)
        assert d0.shape == (sparse_grid.patch_size,) * 2
        assert np.linalg.norm(d0) > 0

    def test_init_probe_is_centered(self, exact_sparse_measurements,
                                    sparse_grid, fresnel, single_probe):
        # the seed correlates far better with the centered truth than with
        # any corner-shifted copy of it
        d0 = init_probe(exact_sparse_measurements, sparse_grid, fresnel)
        centered = nrmse(d0, single_probe[0])
        shifted = nrmse(d0, np.roll(single_probe[0], (8, 8), axis=(0, 1)))
        assert centered < shifted

    def test_init_image_matches_data_strength(self, exact_sparse_measurements,
                                              sparse_grid, fresnel):
        d0 = init_probe(exact_sparse_measurements, sparse_grid, fresnel)
        x0 = init_image(exact_sparse_measurements, sparse_grid, d0)
        assert x0.shape == sparse_grid.image_shape
        # every pixel is an average of ||y_j|| / ||d0|| constants
        consts = [np.linalg.norm(y) / np.linalg.norm(d0)
                  for y in exact_sparse_measurements.y]
        assert min(consts) - 1e-12 <= x0.real.min()
        assert x0.real.max() <= max(consts) + 1e-12
        assert (x0.imag == 0).all()

    def test_init_image_rejects_zero_probe(self, exact_sparse_measurements,
                                           sparse_grid):
        with pytest.raises(ValueError, match="zero energy"):
            init_image(exact_sparse_measurements, sparse_grid,
                       np.zeros((16, 16), dtype=complex))


class TestModeAddition:
    def test_residual_mode_correlates_with_held_out_mode(
            self, phantom_image, two_mode_probes, dense_grid, fresnel):
        # reconstruct two-mode data with K = 1; the residual-based new mode
        # must resemble the missing mode in magnitude
        meas = simulate_measurements(
            phantom_image, two_mode_probes, dense_grid,
            SimParams(photon_rate=1e4, noiseless=True))
        partial = run_bm_pmace(meas, dense_grid, AlgoConfig(max_iters=10),
                               fresnel)
        z = extract_all_patches(partial.image, dense_grid)
        new_mode = add_probe_mode(partial.probes, z, meas, fresnel)
        assert np.linalg.norm(new_mode) > 0
        a = np.abs(new_mode).ravel()
        b = np.abs(two_mode_probes[1]).ravel()
        corr = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        assert corr > 0.3

    def test_rescale_preserves_ratios(self):
        rng = np.random.default_rng(0)
        probes = rng.standard_normal((2, 4, 4)) + 1j * rng.standard_normal((2, 4, 4))
        out = rescale_probe_energy(probes, 5.0)
        assert total_probe_energy(out) == pytest.approx(5.0, rel=1e-12)
        ratio_in = np.sum(np.abs(probes[0]) ** 2) / np.sum(np.abs(probes[1]) ** 2)
        ratio_out = np.sum(np.abs(out[0]) ** 2) / np.sum(np.abs(out[1]) ** 2)
        assert ratio_out == pytest.approx(ratio_in, rel=1e-12)

    def test_rescale_rejects_zero(self):
        with pytest.raises(ValueError):
            rescale_probe_energy(np.zeros((1, 2, 2), dtype=complex), 1.0)


class TestRunLoop:
    def test_truth_start_stays_at_truth(self, phantom_image, single_probe,
                                        sparse_grid, fresnel,
                                        exact_sparse_measurements):
        res = run_bm_pmace(exact_sparse_measurements, sparse_grid,
                           AlgoConfig(max_iters=5), fresnel,
                           ground_truth=phantom_image,
                           initial_image=phantom_image,
                           initial_probes=single_probe)
        assert isinstance(res, ReconResult)
        assert res.iterations == 5
        assert (res.nrmse_trace < 1e-3).all()
        assert (res.k_trace == 1).all()

    def test_two_dim_initial_probe_promoted(self, phantom_image, single_probe,
                                            sparse_grid, fresnel,
                                            exact_sparse_measurements):
        res = run_bm_pmace(exact_sparse_measurements, sparse_grid,
                           AlgoConfig(max_iters=1), fresnel,
                           initial_image=phantom_image,
                           initial_probes=single_probe[0])
        assert res.probes.shape == (1, 16, 16)

    def test_convergence_tol_stops_early(self, phantom_image, single_probe,
                                         sparse_grid, fresnel,
                                         exact_sparse_measurements):
        res = run_bm_pmace(exact_sparse_measurements, sparse_grid,
                           AlgoConfig(max_iters=50, convergence_tol=1e-2),
                           fresnel, initial_image=phantom_image,
                           initial_probes=single_probe)
        assert res.iterations == 1

    def test_log_lines_emitted(self, phantom_image, single_probe, sparse_grid,
                               fresnel, exact_sparse_measurements):
        lines = []
        run_bm_pmace(exact_sparse_measurements, sparse_grid,
                     AlgoConfig(max_iters=3), fresnel,
                     ground_truth=phantom_image, initial_image=phantom_image,
                     initial_probes=single_probe, log=lines.append)
        assert len(lines) == 3
        assert lines[0].startswith("iter=1 K=1 E_c=")
        assert "nrmse=" in lines[0] and "time=" in lines[0]

    def test_scheduled_mode_addition_records_event(
            self, phantom_image, two_mode_probes, sparse_grid, fresnel):
        meas = simulate_measurements(
            phantom_image, two_mode_probes, sparse_grid,
            SimParams(photon_rate=1e4, noiseless=True))
        res = run_bm_pmace(meas, sparse_grid,
                           AlgoConfig(max_iters=8, mode_add_schedule=(3,),
                                      max_modes=2), fresnel)
        assert list(res.k_trace) == [1, 1, 1, 2, 2, 2, 2, 2]
        (it, before, after), = res.mode_add_events
        assert it == 3
        assert after == pytest.approx(before, rel=1e-12)
        assert res.probes.shape[0] == 2

    def test_schedule_capped_by_max_modes(self, phantom_image, single_probe,
                                          sparse_grid, fresnel,
                                          exact_sparse_measurements):
        res = run_bm_pmace(exact_sparse_measurements, sparse_grid,
                           AlgoConfig(max_iters=5, mode_add_schedule=(2,),
                                      max_modes=1), fresnel,
                           initial_image=phantom_image,
                           initial_probes=single_probe)
        assert (res.k_trace == 1).all()
        assert res.mode_add_events == []


class TestPhantoms:
    def test_probe_set_energy_split(self):
        probes = make_probe_set(16, (0.9, 0.1), seed=0)
        energies = np.sum(np.abs(probes) ** 2, axis=(1, 2))
        assert energies[0] / energies.sum() == pytest.approx(0.9, rel=1e-12)

    def test_probe_set_total_energy_matches_main_mode(self):
        single = make_probe_set(16, (1.0,), seed=0)
        double = make_probe_set(16, (0.9, 0.1), seed=0)
        assert np.sum(np.abs(double) ** 2) == pytest.approx(
            np.sum(np.abs(single) ** 2), rel=1e-12)

    def test_probe_set_validation(self):
        with pytest.raises(ValueError):
            make_probe_set(16, (0.9, -0.1))
        with pytest.raises(ValueError):
            make_probe_set(16, (0.5, 0.3, 0.2))

    def test_default_fresnel_is_consistent(self, fresnel):
        assert fresnel is DEFAULT_FRESNEL
