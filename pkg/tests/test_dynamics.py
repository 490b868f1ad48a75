import numpy as np
import pytest

from deltabox.dynamics import (
    ProbabilityTrace,
    TimeGrid,
    compute_trace,
    currents,
    probabilities,
    ratios_and_wronskian,
    reflection_horizon,
    running_decay_rate,
    wavefunction,
)
from deltabox.errors import NonPositiveProbability


class TestTimeGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(-1.0, 5.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 5.0, 1)

    def test_times_uniform(self):
        grid = TimeGrid(1.0, 3.0, 5)
        assert np.allclose(np.diff(grid.times), 0.5)


class TestProbabilities:
    def test_initial_values(self, small_asym):
        _, _, ov = small_asym
        p0, pl, pr = probabilities(ov, 0.0)
        defect = ov.completeness_defect
        # The truncated projection leaks a little outside the well; all of
        # the t = 0 structure is bounded by that truncation defect.
        assert abs(p0 + pl + pr - ov.alpha_norm) < 1e-12
        assert abs(p0 - ov.alpha_norm) < defect
        assert 0.0 <= pl < defect and 0.0 <= pr < defect

    def test_total_is_conserved(self, small_asym, rng):
        _, _, ov = small_asym
        t = rng.uniform(0.0, 12.0, size=9)
        p0, pl, pr = probabilities(ov, t)
        assert np.max(np.abs(p0 + pl + pr - ov.alpha_norm)) < 1e-11

    def test_monotone_leakage_direction(self, small_asym):
        _, _, ov = small_asym
        p0_early, _, _ = probabilities(ov, 0.5)
        p0_late, _, _ = probabilities(ov, 5.0)
        assert p0_late < p0_early

    def test_rejects_negative_time(self, small_asym):
        _, _, ov = small_asym
        with pytest.raises(ValueError):
            probabilities(ov, -0.1)

    def test_symmetric_barriers_split_evenly(self, small_sym):
        _, _, ov = small_sym
        t = np.linspace(0.0, 10.0, 41)
        _, pl, pr = probabilities(ov, t)
        assert np.max(np.abs(pl - pr)) < 1e-10


class TestCurrents:
    def test_zero_at_t0(self, small_asym):
        _, _, ov = small_asym
        j0, jl, jr = currents(ov, 0.0)
        assert j0 == 0.0 and jl == 0.0 and jr == 0.0

    def test_sum_rule(self, small_asym, rng):
        _, _, ov = small_asym
        t = rng.uniform(0.0, 12.0, size=9)
        j0, jl, jr = currents(ov, t)
        assert np.max(np.abs(j0 - jl - jr)) < 1e-8

    def test_matches_finite_difference(self, small_asym):
        _, _, ov = small_asym
        dt = 1e-4
        for t in (0.7, 3.3, 8.9):
            p_hi = probabilities(ov, t + dt)
            p_lo = probabilities(ov, t - dt)
            j0, jl, jr = currents(ov, t)
            fd = [(hi - lo) / (2.0 * dt) for hi, lo in zip(p_hi, p_lo)]
            assert j0 == pytest.approx(-fd[0], abs=1e-6)
            assert jl == pytest.approx(fd[1], abs=1e-6)
            assert jr == pytest.approx(fd[2], abs=1e-6)

    def test_matches_quantum_flux_at_barriers(self, small_asym):
        # dPR/dt must equal the flux Im(Psi* dPsi/dx) through x = +1,
        # evaluated independently from the exterior branch of each mode.
        cfg, spectrum, ov = small_asym
        ell = cfg.box_half_length - 1.0
        a, b, c, d = spectrum.coefficient_arrays()
        p = ov.p
        psi_right = b * np.sin(p * ell)
        dpsi_right = -b * p * np.cos(p * ell)
        for t in (0.4, 2.2, 7.7):
            phases = ov.alpha * np.exp(-1j * ov.energies * t)
            psi = np.sum(phases * psi_right)
            dpsi = np.sum(phases * dpsi_right)
            flux = float(np.imag(np.conj(psi) * dpsi))
            _, _, jr = currents(ov, t)
            assert jr == pytest.approx(flux, abs=1e-10)


class TestRunningDecayRate:
    def test_exponential_input(self):
        t = np.linspace(0.0, 10.0, 101)
        p0 = np.exp(-0.1 * t)
        gamma = running_decay_rate(t, p0)
        assert gamma[0] == 0.0
        assert np.allclose(gamma[1:], 0.1, atol=1e-12)

    def test_nonpositive_raises(self):
        t = np.linspace(0.0, 1.0, 5)
        p0 = np.array([1.0, 0.5, 0.0, 0.5, 1.0])
        with pytest.raises(NonPositiveProbability):
            running_decay_rate(t, p0)


class TestRatios:
    def test_breit_wigner_limit(self):
        # Exact exponential-limit traces: both ratios collapse to the
        # width ratio at every sample.
        gamma, gamma_l, gamma_r = 0.3, 0.2, 0.1
        t = np.linspace(0.1, 30.0, 200)
        pl = gamma_l / gamma * (1.0 - np.exp(-gamma * t))
        pr = gamma_r / gamma * (1.0 - np.exp(-gamma * t))
        jl = gamma_l * np.exp(-gamma * t)
        jr = gamma_r * np.exp(-gamma * t)
        ratio_prob, ratio_curr, wronskian = ratios_and_wronskian(pl, pr, jl, jr)
        beta = gamma_r / gamma_l
        assert np.allclose(ratio_prob, beta, rtol=1e-12)
        assert np.allclose(ratio_curr, beta, rtol=1e-12)
        assert np.max(np.abs(wronskian)) < 1e-12

    def test_undefined_markers(self):
        pl = np.array([0.0, 1e-20, 0.5])
        pr = np.array([0.0, 1e-20, 0.25])
        jl = np.array([0.0, 1e-16, 0.1])
        jr = np.array([0.0, 1e-16, 0.05])
        ratio_prob, ratio_curr, _ = ratios_and_wronskian(pl, pr, jl, jr)
        assert np.isnan(ratio_prob[0]) and np.isnan(ratio_prob[1])
        assert np.isnan(ratio_curr[0]) and np.isnan(ratio_curr[1])
        assert ratio_prob[2] == pytest.approx(0.5)
        assert ratio_curr[2] == pytest.approx(0.5)


class TestTrace:
    def test_columns_and_flags(self, small_asym, small_asym_trace):
        cfg, _, ov = small_asym
        trace = small_asym_trace
        assert len(trace) == 501
        assert trace.horizon == pytest.approx(reflection_horizon(20.0))
        assert trace.uv_return_time < trace.horizon
        assert not trace.exceeds_horizon
        assert np.isnan(trace.ratio_curr[0])
        assert np.max(np.abs(trace.conservation_residual)) < 1e-11
        assert trace.alpha_norm == pytest.approx(ov.alpha_norm)

    def test_probabilities_within_truncation_bounds(self, small_asym_trace):
        trace = small_asym_trace
        eps = 1.0 - trace.alpha_norm
        for col in (trace.p0_surv, trace.p_left, trace.p_right):
            assert np.all(col >= -eps)
            assert np.all(col <= 1.0 + eps)

    def test_symmetric_case_identities(self, small_sym):
        _, _, ov = small_sym
        trace = compute_trace(ov, TimeGrid(0.0, 10.0, 401))
        assert np.max(np.abs(trace.p_left - trace.p_right)) < 1e-10
        defined = ~np.isnan(trace.ratio_prob)
        assert np.max(np.abs(trace.ratio_prob[defined] - 1.0)) < 1e-9
        defined = ~np.isnan(trace.ratio_curr)
        assert np.max(np.abs(trace.ratio_curr[defined] - 1.0)) < 1e-9
        assert np.max(np.abs(trace.wronskian)) < 1e-9

    def test_matches_pointwise_operations(self, small_asym, small_asym_trace):
        _, _, ov = small_asym
        trace = small_asym_trace
        k = 123
        t = float(trace.t[k])
        p0, pl, pr = probabilities(ov, t)
        assert p0 == pytest.approx(trace.p0_surv[k], abs=1e-14)
        assert pl == pytest.approx(trace.p_left[k], abs=1e-14)
        assert pr == pytest.approx(trace.p_right[k], abs=1e-14)


class TestWavefunction:
    def test_matches_direct_mode_sum(self, small_asym):
        _, spectrum, ov = small_asym
        x = np.array([-3.0, -1.0, 0.0, 0.5, 2.5])
        t = 1.7
        psi = wavefunction(spectrum, ov.alpha, x, t)
        from deltabox.spectral import eval_mode

        direct = np.zeros(x.size, dtype=complex)
        for weight, mode in zip(ov.alpha, spectrum.modes):
            direct += weight * np.exp(-1j * mode.energy * t) * eval_mode(mode, x)
        assert np.max(np.abs(psi - direct)) < 1e-12

    def test_density_integrates_to_probabilities(self, small_asym):
        # Quadrature of |Psi|^2 over the well must reproduce P0.
        _, spectrum, ov = small_asym
        t = 2.9
        x = np.linspace(-1.0, 1.0, 16001)
        density = np.abs(wavefunction(spectrum, ov.alpha, x, t)) ** 2
        p0_grid = np.trapezoid(density, x)
        p0, _, _ = probabilities(ov, t)
        assert p0_grid == pytest.approx(p0, abs=1e-8)
