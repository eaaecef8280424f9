"""Winding numbers, SIBC eigenstate construction, healing run plumbing."""

import numpy as np
import pytest

from nonbloch import (
    HealingError,
    LaurentSymbol,
    assemble,
    build_sibc,
    preset,
    run_healing,
    threshold_lambda_tot,
    winding,
)


class TestWinding:
    def test_interior_energy(self):
        assert winding(preset("fig6a"), -1.0 + 0.05j) == 1

    def test_far_energy(self):
        assert winding(preset("fig6a"), 100.0 + 0j) == 0

    def test_on_pbc_curve_raises(self):
        sym = preset("fig6a")
        E = complex(sym(1.234))
        with pytest.raises(HealingError, match="PBC spectrum"):
            winding(sym, E)


class TestSibcState:
    def test_eigenstate_quality(self):
        sym = preset("fig6a")
        state = build_sibc(sym, -1.0 + 0.05j, 600)
        assert np.linalg.norm(state.psi0) == pytest.approx(1.0, abs=1e-12)
        assert state.residual < 1e-10
        assert len(state.betas) == 3
        assert np.all(np.abs(state.betas) < 1.0)

    def test_interior_eigen_relation(self):
        sym = preset("fig6e")
        E0 = -5.0 / 3.0 + 0.2j
        state = build_sibc(sym, E0, 400)
        H = assemble(sym, 400, "obc").matrix
        r = H @ state.psi0 - E0 * state.psi0
        # the right edge carries the truncation error; the left edge and
        # the bulk satisfy the eigenvalue equation
        assert np.max(np.abs(r[:350])) < 1e-8

    def test_short_lattice_raises(self):
        with pytest.raises(HealingError, match="L >= 200"):
            build_sibc(preset("fig6a"), -1.0 + 0.05j, 100)

    def test_short_range_symbol_raises(self):
        sym = LaurentSymbol({1: 1.0j, -1: -0.5j})
        with pytest.raises(HealingError, match="hopping range two"):
            build_sibc(sym, 0.3j, 300)

    def test_wrong_winding_raises(self):
        with pytest.raises(HealingError, match="winding"):
            build_sibc(preset("fig6a"), 100.0 + 0j, 300)


class TestThreshold:
    def test_travelling_preset_uses_P(self):
        from nonbloch import classify, find_P

        sym = preset("fig6a")
        thr = threshold_lambda_tot(sym)
        lam_d = classify(sym, 0.0).dominant.S.imag
        P = find_P(sym)[1].imag
        assert thr == pytest.approx(max(lam_d, P), abs=1e-12)
        assert thr == pytest.approx(P, abs=1e-9)  # Im(P) > Im(S_d) here

    def test_sticky_preset_uses_saddle(self):
        from nonbloch import classify, find_P

        sym = preset("fig6e")
        thr = threshold_lambda_tot(sym)
        lam_d = classify(sym, 0.0).dominant.S.imag
        assert thr == pytest.approx(lam_d, abs=1e-9)


class TestRunHealing:
    def test_schedule_validation(self):
        sym = preset("fig6a")
        with pytest.raises(HealingError, match="t1 < t2"):
            run_healing(sym, -1.0 + 0.05j, t1=5.0, t2=4.0)
        with pytest.raises(HealingError, match="lossy region"):
            run_healing(sym, -1.0 + 0.05j, L=300, l=400)

    def test_report_structure(self):
        # short run: epsilon starts at zero, the lossy phase kicks it up
        sym = preset("fig6a")
        rep = run_healing(sym, -1.0 + 0.05j, L=300, t_end=14.0, dt=0.02)
        assert rep.epsilon[0] < 1e-20
        assert rep.times[0] == 0.0
        i1 = np.searchsorted(rep.times, 1.9)
        i2 = np.searchsorted(rep.times, 4.1)
        assert rep.epsilon[i2] > rep.epsilon[i1]
        assert rep.verdict in ("heals", "not_healing")
        d = rep.as_dict()
        assert set(d) == {"E0", "threshold", "slope", "slope_raw", "verdict",
                          "horizon_reached"}
