"""Saddle points of h(k) and of the drift-shifted phase h(k) - k v.

Single-band saddles come from companion-matrix roots of the cleared
polynomial i beta dh/dbeta - v = 0, refined by Newton.  Multiband saddles
solve the implicit branch system f(beta, E) = 0, i beta df/dbeta + v df/dE = 0
by multi-start two-variable Newton.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .symbol import (
    BivarPoly,
    LaurentSymbol,
    MultibandSymbol,
    TWO_PI,
    char_bivar,
    reduce_k,
)


class SaddleError(Exception):
    pass


@dataclass(frozen=True)
class SaddlePoint:
    k: complex            # Re(k) in [0, 2pi)
    S: complex            # h(k) - k v (energy of the shifted phase)
    v: float
    h2: complex           # second derivative of the shifted phase at k
    band: int = 0
    degenerate: bool = False

    @property
    def energy(self) -> complex:
        """Bare band energy h(k) at the saddle."""
        return self.S + self.k * self.v


def find_saddles(sym: LaurentSymbol, v: float = 0.0) -> list[SaddlePoint]:
    """All p+q saddles of h(k) - k v, sorted by descending Im(S)."""
    p, q = sym.p, sym.q
    if p < 1 or q < 1:
        raise SaddleError("saddle method inapplicable: unidirectional hopping")
    d1 = sym.derivative()
    d2 = d1.derivative()
    roots = np.roots(d1.beta_poly(shift=v))
    if np.any(np.abs(roots) < 1e-12):
        raise SaddleError("spurious beta=0 root survived polynomial clearing")
    # merge companion roots closer than 1e-8 (multiplicity)
    merged: list[tuple[complex, int]] = []
    for b in sorted(roots, key=lambda z: (z.real, z.imag)):
        for i, (b0, mult) in enumerate(merged):
            if abs(b - b0) < 1e-8:
                merged[i] = (b0, mult + 1)
                break
        else:
            merged.append((b, 1))
    out = []
    scale = sym.scale
    for b, mult in merged:
        k = reduce_k(-1j * cmath.log(b))
        # Newton polish on dh/dk - v
        for _ in range(60):
            f = d1(k) - v
            fp = d2(k)
            if abs(fp) < 1e-14 * scale or abs(f) <= 1e-12 * max(scale, 1.0):
                break
            k = k - f / fp
        k = reduce_k(k)
        h2 = d2(k)
        degen = mult > 1 or abs(h2) < 1e-8 * scale
        S = sym(k) - k * v
        out.append(SaddlePoint(k, S, float(v), h2, 0, degen))
        if mult > 1:
            out.extend(
                SaddlePoint(k, S, float(v), h2, 0, True) for _ in range(mult - 1)
            )
    out.sort(key=lambda s: -s.S.imag)
    return out


def _cyl_dist(k1: complex, k2: complex) -> float:
    dr = (k1.real - k2.real) % TWO_PI
    dr = min(dr, TWO_PI - dr)
    return math.hypot(dr, k1.imag - k2.imag)


def find_saddles_multiband(
    sym: MultibandSymbol,
    v: float = 0.0,
    band_mode: str = "branch",
    grid: int = 40,
    ki_window: float = 2.0,
) -> list[SaddlePoint]:
    """Saddles of all m energy branches (band_mode='branch') or of
    det h(k) treated as a scalar symbol (band_mode='det')."""
    if sym.m > 4:
        raise SaddleError("multiband saddle search supports m <= 4")
    if band_mode == "det":
        return find_saddles(sym.det(), v)
    if band_mode != "branch":
        raise ValueError(f"unknown band_mode {band_mode!r}")

    f = char_bivar(sym)
    fb = f.d_beta()
    fE = f.d_E()
    fbb = fb.d_beta()
    fbE = fb.d_E()
    fEE = fE.d_E()

    def residuals(beta, E):
        g1 = f(beta, E)
        g2 = 1j * beta * fb(beta, E) + v * fE(beta, E)
        return g1, g2

    def newton(beta, E):
        for _ in range(80):
            g1, g2 = residuals(beta, E)
            if abs(g1) < 1e-13 and abs(g2) < 1e-13:
                return beta, E, True
            j11 = fb(beta, E)
            j12 = fE(beta, E)
            j21 = 1j * fb(beta, E) + 1j * beta * fbb(beta, E) + v * fbE(beta, E)
            j22 = 1j * beta * fbE(beta, E) + v * fEE(beta, E)
            det = j11 * j22 - j12 * j21
            if abs(det) < 1e-300:
                return beta, E, False
            db = (g1 * j22 - g2 * j12) / det
            dE = (j11 * g2 - j21 * g1) / det
            beta, E = beta - db, E - dE
            if not (abs(beta) < 1e6 and abs(E) < 1e6) or abs(beta) < 1e-12:
                return beta, E, False
        g1, g2 = residuals(beta, E)
        return beta, E, abs(g1) < 1e-10 and abs(g2) < 1e-10

    found: list[tuple[complex, complex]] = []
    krs = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    kis = np.linspace(-ki_window, ki_window, grid)
    for kr in krs:
        for ki in kis:
            beta0 = cmath.exp(1j * (kr + 1j * ki))
            for E0 in np.linalg.eigvals(sym(kr + 1j * ki)):
                beta, E, ok = newton(beta0, complex(E0))
                if not ok:
                    continue
                g1, g2 = residuals(beta, E)
                if abs(g1) > 1e-10 or abs(g2) > 1e-10:
                    continue
                k = reduce_k(-1j * cmath.log(beta))
                if all(
                    _cyl_dist(k, k0) > 1e-6 or abs(E - E1) > 1e-6
                    for k0, E1 in found
                ):
                    found.append((k, E))
    out = []
    for k, E in found:
        h2 = _branch_second_derivative(f, fb, fE, k, E)
        S = E - k * v
        degen = abs(h2) < 1e-8 * max(1.0, abs(E))
        out.append(SaddlePoint(k, S, float(v), h2, _band_index(sym, k, E), degen))
    out.sort(key=lambda s: -s.S.imag)
    return out


def branch_dE_dk(f: BivarPoly, fb: BivarPoly, fE: BivarPoly, k: complex, E: complex) -> complex:
    """dE/dk on the branch through (k, E) via implicit differentiation."""
    beta = cmath.exp(1j * k)
    return -1j * beta * fb(beta, E) / fE(beta, E)


def branch_continue(f: BivarPoly, k: complex, E_guess: complex) -> complex:
    """Solve f(e^{ik}, E) = 0 for E near E_guess (1d Newton)."""
    beta = cmath.exp(1j * k)
    fE = f.d_E()
    E = E_guess
    for _ in range(50):
        val = f(beta, E)
        der = fE(beta, E)
        if abs(der) < 1e-300:
            break
        step = val / der
        E = E - step
        if abs(step) < 1e-14 * max(1.0, abs(E)):
            break
    return E


def _branch_second_derivative(f, fb, fE, k, E, h=1e-6) -> complex:
    Ep = branch_continue(f, k + h, E)
    Em = branch_continue(f, k - h, E)
    dp = branch_dE_dk(f, fb, fE, k + h, Ep)
    dm = branch_dE_dk(f, fb, fE, k - h, Em)
    return (dp - dm) / (2 * h)


def _band_index(sym: MultibandSymbol, k: complex, E: complex) -> int:
    """Band label by continuity against the real-k spectrum at Re(k)."""
    evals = np.linalg.eigvals(sym(complex(k.real, 0.0)))
    order = np.argsort(evals.real + 1e-9 * evals.imag)
    return int(np.argmin(np.abs(evals[order] - E)))


def dlambda_dv_check(s: SaddlePoint) -> float:
    """Analytic derivative of lambda(v) at a dominant saddle: -Im(k_s)."""
    return -float(s.k.imag)


def write_saddles_csv(path, saddles: list[SaddlePoint]):
    with open(path, "w") as fh:
        fh.write("v,band,re_k,im_k,re_S,im_S,re_h2,im_h2,degenerate\n")
        for s in saddles:
            fh.write(
                f"{s.v:.12g},{s.band},{s.k.real:.12g},{s.k.imag:.12g},"
                f"{s.S.real:.12g},{s.S.imag:.12g},{s.h2.real:.12g},{s.h2.imag:.12g},"
                f"{int(s.degenerate)}\n"
            )
