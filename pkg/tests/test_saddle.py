"""Saddle points of h(k) - kv: companion roots, Newton polish, multiband."""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonbloch import (
    LaurentSymbol,
    MultibandSymbol,
    SaddleError,
    dlambda_dv_check,
    find_saddles,
    find_saddles_multiband,
    preset,
)
from nonbloch.symbol import TWO_PI
from conftest import random_symbol


class TestSingleBand:
    def test_count_and_residual(self, rng):
        for _ in range(10):
            sym = random_symbol(rng)
            d1 = sym.derivative()
            saddles = find_saddles(sym, 0.0)
            assert len(saddles) == sym.p + sym.q
            for s in saddles:
                if not s.degenerate:
                    assert abs(d1(s.k)) < 1e-8 * max(1.0, sym.scale)

    def test_shifted_phase(self):
        sym = preset("fig2a")
        v = 0.8
        d1 = sym.derivative()
        for s in find_saddles(sym, v):
            assert abs(d1(s.k) - v) < 1e-9
            assert s.S == pytest.approx(sym(s.k) - s.k * v, abs=1e-12)
            assert s.energy == pytest.approx(sym(s.k), abs=1e-12)

    def test_sorted_by_descending_im(self):
        saddles = find_saddles(preset("fig2b"), 0.0)
        ims = [s.S.imag for s in saddles]
        assert ims == sorted(ims, reverse=True)

    def test_fig2b_has_four_saddles(self):
        assert len(find_saddles(preset("fig2b"), 0.0)) == 4

    def test_k_wrapped_to_cylinder(self, rng):
        for s in find_saddles(random_symbol(rng), 0.3):
            assert 0 <= s.k.real < TWO_PI

    def test_unidirectional_raises(self):
        with pytest.raises(SaddleError, match="unidirectional"):
            find_saddles(LaurentSymbol({1: 1.0, 2: 0.3}), 0.0)

    def test_cosine_saddles(self):
        # 2 cos k has saddles exactly at k = 0 and k = pi
        sym = LaurentSymbol({1: 1.0, -1: 1.0})
        ks = sorted(s.k.real for s in find_saddles(sym, 0.0))
        assert ks == pytest.approx([0.0, np.pi], abs=1e-9)
        for s in find_saddles(sym, 0.0):
            assert abs(s.k.imag) < 1e-9


class TestMultiband:
    def test_diagonal_blocks_give_single_band_saddles(self):
        # decoupled bands: each diagonal entry keeps its own saddles, the
        # second one energy-shifted by the constant
        s = LaurentSymbol({1: 0.9j, -1: -0.4j, 0: -0.2j})
        shift = 0.7
        sym = MultibandSymbol(((s, 0), (0, s + shift)))
        single = find_saddles(s, 0.0)
        multi = find_saddles_multiband(sym, 0.0, "branch")
        want = {(round(x.k.real, 6), round(x.k.imag, 6),
                 round(x.S.real + d, 6), round(x.S.imag, 6))
                for x in single for d in (0.0, shift)}
        got = {(round(x.k.real, 6), round(x.k.imag, 6),
                round(x.S.real, 6), round(x.S.imag, 6)) for x in multi}
        assert got == want

    def test_branch_saddles_satisfy_char_poly(self):
        from nonbloch.symbol import char_bivar

        sym = preset("figS3b")
        f = char_bivar(sym)
        for s in find_saddles_multiband(sym, 0.0, "branch"):
            beta = cmath.exp(1j * s.k)
            assert abs(f(beta, s.S)) < 1e-8

    def test_branch_saddles_are_stationary(self):
        from nonbloch.saddle import branch_continue
        from nonbloch.symbol import char_bivar

        sym = preset("figS3a")
        f = char_bivar(sym)
        h = 1e-6
        for s in find_saddles_multiband(sym, 0.0, "branch"):
            Ep = branch_continue(f, s.k + h, s.S)
            Em = branch_continue(f, s.k - h, s.S)
            assert abs((Ep - Em) / (2 * h)) < 1e-4

    def test_det_mode_matches_scalar_route(self):
        sym = preset("figS3c")
        via_mode = find_saddles_multiband(sym, 0.0, "det")
        direct = find_saddles(sym.det(), 0.0)
        assert len(via_mode) == len(direct)
        for a, b in zip(via_mode, direct):
            assert a.k == pytest.approx(b.k, abs=1e-12)

    def test_bad_band_mode(self):
        with pytest.raises(ValueError):
            find_saddles_multiband(preset("figS3a"), 0.0, "branches")


class TestLambdaDerivative:
    def test_real_axis_saddle_gives_zero(self):
        # Im k_s = 0 forces dlambda/dv = 0: the drift-frame rate is extremal
        sym = LaurentSymbol({1: 1.0, -1: 1.0})
        s = find_saddles(sym, 0.0)[0]
        assert dlambda_dv_check(s) == pytest.approx(-s.k.imag)
        assert abs(s.k.imag) < 1e-9

    def test_matches_finite_difference(self):
        from nonbloch.thimble import classify

        sym = preset("fig4e")
        v, h = 0.3, 1e-4
        lam = {}
        for vv in (v - h, v, v + h):
            lam[vv] = classify(sym, vv).dominant.S.imag
        fd = (lam[v + h] - lam[v - h]) / (2 * h)
        s = classify(sym, v).dominant
        assert dlambda_dv_check(s) == pytest.approx(fd, abs=1e-4)
