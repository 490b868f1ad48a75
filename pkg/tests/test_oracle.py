import numpy as np
import pytest

from deltabox.dynamics import TimeGrid, compute_trace
from deltabox.oracle import GridConfig, compare_with_spectral, propagate
from deltabox.overlaps import build_overlap_set
from deltabox.spectral import BarrierConfig, solve_spectrum


class TestGridConfig:
    def test_dx_must_divide_barrier_distance(self):
        with pytest.raises(ValueError):
            GridConfig(dx=0.03, box_half_length=10.0)

    def test_dx_must_divide_box(self):
        with pytest.raises(ValueError):
            GridConfig(dx=0.2, box_half_length=10.1)

    def test_default_dt_is_dx_squared(self):
        grid = GridConfig(dx=0.02, box_half_length=5.0)
        assert grid.dt == pytest.approx(4e-4)

    def test_dt_heuristic_enforced_unless_relaxed(self):
        with pytest.raises(ValueError):
            GridConfig(dx=0.02, box_half_length=5.0, dt=1e-2)
        grid = GridConfig(dx=0.02, box_half_length=5.0, dt=1e-2, relax_dt=True)
        assert grid.dt == 1e-2

    def test_interior_point_count(self):
        grid = GridConfig(dx=0.1, box_half_length=5.0)
        assert grid.n_interior == 99


class TestPropagate:
    def test_norm_conserved_free_box(self):
        cfg = BarrierConfig(v0=0.0, kappa=1.0, box_half_length=10.0, n_modes=4)
        grid = GridConfig(dx=0.02, box_half_length=10.0)
        trace = propagate(cfg, grid, t_end=10.0, n_samples=41)
        assert trace.norm_drift_max < 1e-10

    def test_symmetric_case_stays_symmetric(self):
        cfg = BarrierConfig(v0=5.0, kappa=1.0, box_half_length=10.0, n_modes=4)
        grid = GridConfig(dx=0.02, box_half_length=10.0)
        trace = propagate(cfg, grid, t_end=5.0, n_samples=21)
        assert np.max(np.abs(trace.p_left - trace.p_right)) < 1e-8

    def test_probabilities_sum_to_one(self):
        cfg = BarrierConfig(v0=8.0, kappa=0.5, box_half_length=10.0, n_modes=4)
        grid = GridConfig(dx=0.02, box_half_length=10.0)
        trace = propagate(cfg, grid, t_end=5.0, n_samples=21)
        total = trace.p0_surv + trace.p_left + trace.p_right
        assert np.max(np.abs(total - 1.0)) < 1e-10

    def test_initial_state_probabilities(self):
        cfg = BarrierConfig(v0=8.0, kappa=0.5, box_half_length=10.0, n_modes=4)
        grid = GridConfig(dx=0.01, box_half_length=10.0)
        trace = propagate(cfg, grid, t_end=0.5, n_samples=6)
        assert trace.p0_surv[0] == pytest.approx(1.0, abs=1e-6)
        assert trace.p_left[0] == pytest.approx(0.0, abs=1e-6)

    def test_grid_box_mismatch_rejected(self):
        cfg = BarrierConfig(v0=1.0, kappa=1.0, box_half_length=10.0, n_modes=4)
        grid = GridConfig(dx=0.02, box_half_length=5.0)
        with pytest.raises(ValueError):
            propagate(cfg, grid, t_end=1.0, n_samples=5)


class TestCrossValidation:
    def test_agrees_with_spectral_and_converges_second_order(self):
        # Both solvers on the same small box; halving dx must shrink the
        # gap to the spectral result by roughly 4x (second order in space).
        cfg = BarrierConfig(v0=5.0, kappa=0.4, box_half_length=10.0, n_modes=250)
        spectral = compute_trace(
            build_overlap_set(solve_spectrum(cfg)), TimeGrid(0.0, 5.0, 51)
        )
        errors = {}
        for dx in (0.04, 0.02):
            grid = GridConfig(dx=dx, box_half_length=10.0, dt=2e-4,
                              relax_dt=True)
            oracle = propagate(cfg, grid, t_end=5.0, n_samples=51)
            errors[dx] = float(np.max(np.abs(oracle.p0_surv - spectral.p0_surv)))
        ratio = errors[0.04] / errors[0.02]
        assert 2.5 < ratio < 6.0

    def test_compare_report_structure(self):
        cfg = BarrierConfig(v0=3.0, kappa=0.5, box_half_length=5.0, n_modes=60)
        report = compare_with_spectral(
            cfg, t_end=2.0, n_samples=21, dx=0.025, dt=1e-3, richardson=True
        )
        assert set(report["max_abs_diff"]) == {"P0", "PL", "PR"}
        assert report["dx_fine"] == pytest.approx(0.0125)
        assert report["norm_drift_max"] < 1e-8
        for key in ("P0", "PL", "PR"):
            assert report["max_abs_diff"][key] < 5e-3
