"""Real-space assembly, spectra, biorthogonality, and GBZ extraction."""

import numpy as np
import pytest

from nonbloch import (
    LatticeError,
    LaurentSymbol,
    assemble,
    gbz_from_obc,
    pbc_curve,
    point_O_limit,
    preset,
    spectrum,
)
from nonbloch.symbol import TWO_PI
from conftest import random_symbol


class TestAssemble:
    def test_hopping_placement(self):
        sym = preset("fig2a")
        H = assemble(sym, 12, "obc").matrix
        for n, c in sym.coeffs.items():
            for x in range(12):
                if 0 <= x + n < 12:
                    assert H[x, x + n] == c

    def test_pbc_wraps(self):
        sym = LaurentSymbol({1: 2.0, -1: 3.0})
        H = assemble(sym, 8, "pbc").matrix
        assert H[7, 0] == 2.0
        assert H[0, 7] == 3.0

    def test_pbc_eigenvalues_are_symbol_samples(self):
        sym = preset("fig2b")
        L = 24
        E = np.linalg.eigvals(assemble(sym, L, "pbc").matrix)
        expected = sym(TWO_PI * np.arange(L) / L)
        # set comparison via sorted complex values
        got = np.sort_complex(np.round(E, 9))
        want = np.sort_complex(np.round(expected, 9))
        assert np.allclose(got, want, atol=1e-7)

    def test_multiband_blocks(self):
        sym = preset("figS3a")
        H = assemble(sym, 10, "obc").matrix
        assert H.shape == (20, 20)
        assert np.allclose(H[0:2, 2:4], sym.block(1))
        assert np.allclose(H[2:4, 0:2], sym.block(-1))

    def test_too_short_raises(self):
        with pytest.raises(LatticeError, match="shorter than hopping range"):
            assemble(preset("fig2a"), 4, "obc")

    def test_bad_boundary(self):
        with pytest.raises(ValueError):
            assemble(preset("fig2a"), 20, "torus")


class TestSpectrum:
    def test_residuals_and_biorthogonality(self):
        spec = spectrum(assemble(preset("fig2b"), 40, "obc"))
        H = assemble(preset("fig2b"), 40, "obc").matrix
        r = np.linalg.norm(H @ spec.right - spec.right * spec.eigenvalues[None, :])
        assert r < 1e-8 * np.linalg.norm(H)
        overlap = spec.left.conj().T @ spec.right
        assert np.allclose(overlap, np.eye(40), atol=1e-7)

    def test_point_O_is_max_imag(self):
        spec = spectrum(assemble(preset("fig2a"), 60, "obc"))
        assert spec.point_O.imag == pytest.approx(np.max(spec.eigenvalues.imag))
        assert spec.max_im == spec.point_O.imag

    def test_hermitian_spectrum_real(self, rng):
        sym = LaurentSymbol({1: 0.7 + 0.2j, -1: 0.7 - 0.2j, 0: 0.3})
        spec = spectrum(assemble(sym, 50, "obc"))
        assert np.max(np.abs(spec.eigenvalues.imag)) < 1e-10


class TestGbz:
    def test_gbz_points_solve_symbol(self):
        sym = preset("fig2a")
        spec = spectrum(assemble(sym, 40, "obc"))
        assert len(spec.gbz_points) == 2 * 40
        # each point comes from h(beta) = E_n for some OBC eigenvalue
        vals = sym.eval_beta(spec.gbz_points)
        dist = np.min(
            np.abs(vals[:, None] - spec.eigenvalues[None, :]), axis=1
        )
        assert np.max(dist) < 1e-7

    def test_middle_moduli_pair_up(self):
        sym = preset("fig2b")
        E = spectrum(assemble(sym, 30, "obc")).eigenvalues
        betas = gbz_from_obc(sym, E).reshape(-1, 2)
        ratio = np.abs(betas[:, 0]) / np.abs(betas[:, 1])
        # the q-th and (q+1)-th moduli coincide up to finite-size corrections
        assert np.median(np.abs(ratio - 1)) < 0.05

    def test_unidirectional_raises(self):
        sym = LaurentSymbol({1: 1.0, 2: 0.5})
        with pytest.raises(LatticeError, match="unidirectional"):
            gbz_from_obc(sym, np.array([0.1 + 0.0j]))

    def test_hermitian_gbz_on_unit_circle(self):
        sym = LaurentSymbol({1: 0.9 - 0.4j, -1: 0.9 + 0.4j, 2: 0.2, -2: 0.2})
        spec = spectrum(assemble(sym, 50, "obc"))
        assert np.max(np.abs(np.abs(spec.gbz_points) - 1.0)) < 1e-6

    def test_point_O_limit_above_finite_L(self, rng):
        for _ in range(5):
            sym = random_symbol(rng)
            lim = point_O_limit(sym, 120)
            finite = spectrum(assemble(sym, 120, "obc")).point_O.imag
            assert lim >= finite - 1e-12


class TestPbcCurve:
    def test_band_count_and_continuity(self):
        ks, bands = pbc_curve(preset("figS3b"), 128)
        assert bands.shape == (2, 128)
        jumps = np.abs(np.diff(bands, axis=1))
        assert np.max(jumps) < 0.5  # tracked bands do not swap mid-curve

    def test_single_band_is_symbol(self):
        sym = preset("fig2a")
        ks, bands = pbc_curve(sym, 64)
        assert np.allclose(bands[0], sym(ks))

    def test_minimum_samples(self):
        with pytest.raises(ValueError):
            pbc_curve(preset("fig2a"), 32)
