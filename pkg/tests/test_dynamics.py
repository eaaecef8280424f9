"""Evolution backends, exponent fits, lambda(v), crossover estimation."""

import math

import numpy as np
import pytest

from nonbloch import (
    DynamicsError,
    LaurentSymbol,
    assemble,
    default_times,
    delta_state,
    evolve,
    find_P,
    flat_state,
    lambda_of_v,
    preset,
    spectrum,
    t_c_theory,
    velocities,
)
from nonbloch.dynamics import _crossover_numeric, _robust_fit


class TestVelocities:
    def test_reference_values(self):
        # extremal group velocities of the crossover parameter set
        vp, vm, vc = velocities(preset("fig7"))
        assert vp == pytest.approx(1.4998, abs=1e-3)
        assert vm == pytest.approx(-3.0, abs=1e-3)

    def test_t_c_reference(self):
        assert t_c_theory(preset("fig7"), 51) == pytest.approx(50.0044, abs=0.1)

    def test_cosine_band(self):
        # 2 cos k: group velocity -2 sin k, extremes +-2
        vp, vm, vc = velocities(LaurentSymbol({1: 1.0, -1: 1.0}))
        assert vp == pytest.approx(2.0, abs=1e-6)
        assert vm == pytest.approx(-2.0, abs=1e-6)
        assert vc == pytest.approx(2.0, abs=1e-6)


class TestFindP:
    def test_travelling_preset(self):
        k, P, v = find_P(preset("fig2a"))
        assert P.imag == pytest.approx(-0.35, abs=1e-6)
        assert v == pytest.approx(1.4, abs=1e-6)

    def test_rejects_negative_velocity_maxima(self):
        # mirrored symbol moves its admissible maximum or loses it entirely
        sym = preset("fig2a")
        mirrored = LaurentSymbol({-n: c for n, c in sym.coeffs.items()})
        found = find_P(mirrored)
        if found is not None:
            assert found[2] > 0

    def test_multiband_rejected(self):
        with pytest.raises(DynamicsError):
            find_P(preset("figS3a"))


class TestEvolve:
    def test_backends_agree(self):
        sym = preset("fig2b")
        L = 24
        H = assemble(sym, L, "obc")
        times = np.linspace(0.0, 4.0, 101)
        psi0 = delta_state(L)
        traces = {
            b: evolve(H, psi0, times, backend=b)
            for b in ("propagator", "spectral", "ode")
        }
        ref = traces["propagator"].log_amp_x0
        for b in ("spectral", "ode"):
            other = traces[b].log_amp_x0
            m = np.isfinite(ref) & np.isfinite(other) & (ref > -25)
            assert np.max(np.abs(ref[m] - other[m])) < 1e-6

    def test_hermitian_norm_conserved(self):
        sym = LaurentSymbol({1: 0.8, -1: 0.8, 0: 0.1})
        H = assemble(sym, 30, "obc")
        tr = evolve(H, delta_state(30), np.linspace(0, 10, 201))
        assert np.max(np.abs(tr.log_norm)) < 1e-8

    def test_nonuniform_grid_rejected(self):
        H = assemble(preset("fig2a"), 20, "obc")
        with pytest.raises(DynamicsError, match="uniform"):
            evolve(H, delta_state(20), np.array([0.0, 0.1, 0.3]))

    def test_unnormalized_state_rejected(self):
        H = assemble(preset("fig2a"), 20, "obc")
        with pytest.raises(DynamicsError, match="normalized"):
            evolve(H, 2.0 * delta_state(20), np.linspace(0, 1, 11))

    def test_snapshots_peak_normalized(self):
        H = assemble(preset("fig2a"), 30, "obc")
        tr = evolve(H, delta_state(30), np.linspace(0, 5, 101), n_snapshots=10)
        assert np.allclose(tr.snapshots.max(axis=1), 1.0)

    def test_initial_states(self):
        psi = flat_state(20, 5)
        assert np.linalg.norm(psi) == pytest.approx(1.0)
        assert np.count_nonzero(psi) == 5
        psi = delta_state(10, 3, bands=2)
        assert psi[6] == 1.0 and np.count_nonzero(psi) == 1


class TestRobustFit:
    def test_plain_line(self):
        t = np.linspace(5, 30, 400)
        y = -0.43 * t + 2.0
        w = _robust_fit(t, y, 5, 30, mu_floor=-10.0, order=5)
        assert w.slope == pytest.approx(-0.43, abs=1e-12)
        assert w.method == "ls"

    def test_oscillatory_trace_fits_peaks(self, rng):
        # deep interference dips drag a least-squares line; peaks do not
        t = np.linspace(5, 60, 2000)
        y = -0.3 * t + np.log(np.abs(np.cos(2.0 * t)) + 1e-3)
        w = _robust_fit(t, y, 5, 60, mu_floor=-10.0, order=10)
        assert w.method == "peaks"
        assert w.slope == pytest.approx(-0.3, abs=0.01)

    def test_floor_masking(self):
        # second half of the trace saturates at the round-off floor
        t = np.linspace(0, 40, 800)
        mu = -0.05
        floor = math.log(1e-14) + mu * t
        y = np.maximum(-1.5 * t, floor - 0.5)
        w = _robust_fit(t, y, 0, 40, mu_floor=mu, order=5)
        assert w.slope == pytest.approx(-1.5, abs=0.05)

    def test_prefactor_correction(self):
        # y = a t - p ln t: the corrected slope removes the ln t bias
        t = np.linspace(10, 40, 600)
        y = -0.6 * t - 1.5 * np.log(t)
        w = _robust_fit(t, y, 10, 40, mu_floor=-10.0, order=5, prefactor=1.5)
        assert w.slope < -0.6  # raw slope is biased downward
        assert w.slope_corrected == pytest.approx(-0.6, abs=1e-6)

    def test_insufficient_window(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(DynamicsError, match="insufficient"):
            _robust_fit(t, -t, 0, 1, mu_floor=0.0, order=3)


class TestCrossover:
    def test_synthetic_two_regime_trace(self):
        # fast decay until t = 20 with an interference dip at the junction,
        # then the trace rejoins the long-time line at t = 24
        t = np.linspace(0, 60, 1200)
        fast, slow, icpt = -0.5, -0.05, -9.0
        line = slow * t + icpt
        y = np.where(t < 20.0, fast * t, line)
        y -= np.maximum(0.0, 1.0 - np.abs(t - 20.0) / 4.0)
        tc = _crossover_numeric(t, y, slow, icpt)
        assert tc == pytest.approx(24.0, abs=0.2)

    def test_no_recrossing_returns_none(self):
        t = np.linspace(0, 10, 100)
        y = -0.1 * t
        assert _crossover_numeric(t, y, -0.1, 1.0) is None


class TestLambdaOfV:
    def test_grid_validation(self):
        with pytest.raises(DynamicsError):
            lambda_of_v(preset("fig2a"), v_grid=np.array([0.5, 0.2]))
        with pytest.raises(DynamicsError):
            lambda_of_v(preset("fig2a"), v_grid=np.array([-0.5, 0.2]))

    def test_peak_matches_admissible_maximum(self):
        # travelling case: lambda(v) peaks at (v_P, Im P)
        sym = preset("fig2a")
        _, P, vP = find_P(sym)
        grid = np.linspace(0.0, 2.1, 106)
        records, v_peak, lam_peak = lambda_of_v(sym, v_grid=grid)
        assert v_peak == pytest.approx(vP, abs=0.02)
        assert lam_peak == pytest.approx(P.imag, abs=0.005)

    def test_sticky_case_peaks_at_zero(self):
        grid = np.linspace(0.0, 1.0, 26)
        _, v_peak, lam_peak = lambda_of_v(preset("fig4e"), v_grid=grid)
        assert v_peak == 0.0


class TestDefaultTimes:
    def test_grid_is_uniform_and_long_enough(self):
        sym = preset("fig7")
        times = default_times(sym, 51)
        assert np.allclose(np.diff(times), times[1] - times[0])
        assert times[-1] >= 7.9 * t_c_theory(sym, 51)
