"""Finite real-space Hamiltonians, complex spectra, and GBZ extraction.

Assembly convention: coefficient c_n of e^{ink} places amplitude on
|x><x+n|, so that plane waves e^{ikx} diagonalize the PBC matrix with
eigenvalue h(k) on the discrete Brillouin zone.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .symbol import LaurentSymbol, MultibandSymbol, TWO_PI


class LatticeError(Exception):
    pass


@dataclass(frozen=True)
class LatticeHamiltonian:
    sym: object
    L: int
    boundary: str  # "obc" | "pbc"
    matrix: np.ndarray

    @property
    def bands(self) -> int:
        return getattr(self.sym, "m", 1)


@dataclass(frozen=True)
class SpectrumSet:
    eigenvalues: np.ndarray          # (L*m,) complex
    right: np.ndarray                # columns are right eigenvectors
    left: np.ndarray                 # columns are left eigenvectors, <l_n| H = E_n <l_n|
    point_O: complex
    pbc_samples: tuple               # (k_grid, energies[band, k])
    gbz_points: np.ndarray           # complex beta values (single-band OBC only)

    @property
    def max_im(self) -> float:
        return float(self.point_O.imag)


def assemble(sym, L: int, boundary: str = "obc") -> LatticeHamiltonian:
    """Dense real-space Hamiltonian for L unit cells."""
    boundary = boundary.lower()
    if boundary not in ("obc", "pbc"):
        raise ValueError(f"boundary must be 'obc' or 'pbc', got {boundary!r}")
    p, q = sym.p, sym.q
    if L <= 2 * max(p, q):
        raise LatticeError("lattice shorter than hopping range")
    if isinstance(sym, MultibandSymbol):
        m = sym.m
        H = np.zeros((L * m, L * m), dtype=complex)
        for n in range(-q, p + 1):
            blk = sym.block(n)
            if not blk.any():
                continue
            for x in range(L):
                xp = x + n
                if 0 <= xp < L:
                    H[x * m:(x + 1) * m, xp * m:(xp + 1) * m] += blk
                elif boundary == "pbc":
                    xp %= L
                    H[x * m:(x + 1) * m, xp * m:(xp + 1) * m] += blk
    else:
        H = np.zeros((L, L), dtype=complex)
        for n, c in sym.coeffs.items():
            for x in range(L):
                xp = x + n
                if 0 <= xp < L:
                    H[x, xp] += c
                elif boundary == "pbc":
                    H[x, xp % L] += c
    return LatticeHamiltonian(sym, L, boundary, H)


def spectrum(H: LatticeHamiltonian, pbc_samples: int = 256) -> SpectrumSet:
    """Full biorthogonal eigensystem plus PBC curve and GBZ points."""
    E, vl, vr = scipy.linalg.eig(H.matrix, left=True, right=True)
    scale = np.linalg.norm(H.matrix, ord=np.inf)
    # biorthonormalize the pairs scipy returns index-aligned
    overlap = np.einsum("ij,ij->j", vl.conj(), vr)
    bad = np.abs(overlap) < 1e-300
    if bad.any():
        raise LatticeError(f"eigensolver produced defective pairs at {np.where(bad)[0]}")
    vl = vl / overlap.conj()[None, :]
    res = np.linalg.norm(H.matrix @ vr - vr * E[None, :], axis=0)
    if np.any(res > 1e-8 * max(scale, 1.0)):
        idx = np.where(res > 1e-8 * max(scale, 1.0))[0]
        raise LatticeError(f"eigensolver residuals too large at indices {idx.tolist()}")
    point_O = complex(E[np.argmax(E.imag)])
    pbc = pbc_curve(H.sym, max(pbc_samples, 64))
    gbz = np.empty(0, dtype=complex)
    if H.boundary == "obc" and not isinstance(H.sym, MultibandSymbol):
        if H.sym.p >= 1 and H.sym.q >= 1:
            gbz = gbz_from_obc(H.sym, E)
    return SpectrumSet(E, vr, vl, point_O, pbc, gbz)


def gbz_from_obc(sym: LaurentSymbol, obc_eigs: np.ndarray) -> np.ndarray:
    """GBZ points from the middle-modulus roots of h(beta) = E_n.

    For each OBC eigenvalue, h(beta) = E has p + q roots; in the L -> infty
    limit the q-th and (q+1)-th by modulus coincide in magnitude and lie on
    the GBZ.
    """
    p, q = sym.p, sym.q
    if p == 0 or q == 0:
        raise LatticeError("GBZ degenerate: unidirectional hopping")
    out = []
    for E in np.atleast_1d(obc_eigs):
        roots = np.roots(sym.beta_poly(shift=E))
        roots = roots[np.argsort(np.abs(roots))]
        out.extend(roots[q - 1:q + 1])
    return np.asarray(out, dtype=complex)


def point_O_limit(sym: LaurentSymbol, L: int = 160) -> float:
    """max Im of the OBC spectrum in the large-L limit.

    The limiting spectrum consists of arcs whose endpoints are saddle
    energies sitting on the GBZ; when the maximum of Im is attained at such
    an endpoint, finite lattices approach it from below like 1/L^2.  The
    finite-L maximum is therefore combined with the energies of the saddles
    whose double root h(beta) = E_s is the middle-modulus pair.
    """
    from .saddle import find_saddles

    E = scipy.linalg.eigvals(assemble(sym, L, "obc").matrix)
    best = float(np.max(E.imag))
    q = sym.q
    for s in find_saddles(sym, 0.0):
        beta_s = cmath.exp(1j * s.k)
        roots = np.roots(sym.beta_poly(shift=s.energy))
        rest = roots[np.argsort(np.abs(roots - beta_s))[2:]]  # drop the double root
        inside = int(np.sum(np.abs(rest) < abs(beta_s) * (1.0 - 1e-9)))
        if inside == q - 1:
            best = max(best, s.S.imag)
    return best


def pbc_curve(sym, samples: int = 256):
    """Per-band energies on a uniform real-k grid, band-tracked by continuity."""
    if samples < 64:
        raise ValueError("need at least 64 samples")
    ks = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    if not isinstance(sym, MultibandSymbol):
        return ks, sym(ks)[None, :]
    m = sym.m
    bands = np.zeros((m, samples), dtype=complex)
    prev = None
    for j, k in enumerate(ks):
        evals = np.linalg.eigvals(sym(k))
        if prev is None:
            order = np.argsort(evals.real + 1e-9 * evals.imag)
        else:
            # greedy nearest-match to the previous column
            order = np.full(m, -1, dtype=int)
            free = list(range(m))
            for b in range(m):
                i = min(free, key=lambda i: abs(evals[i] - prev[b]))
                order[b] = i
                free.remove(i)
        bands[:, j] = evals[order]
        prev = bands[:, j]
    return ks, bands


def write_spectrum_csv(path, spec: SpectrumSet):
    with open(path, "w") as fh:
        fh.write("re,im,kind\n")
        for E in spec.eigenvalues:
            fh.write(f"{E.real:.12g},{E.imag:.12g},obc\n")
        _, bands = spec.pbc_samples
        for row in bands:
            for E in row:
                fh.write(f"{E.real:.12g},{E.imag:.12g},pbc\n")


def write_gbz_csv(path, spec: SpectrumSet):
    with open(path, "w") as fh:
        fh.write("re_beta,im_beta\n")
        for b in spec.gbz_points:
            fh.write(f"{b.real:.12g},{b.imag:.12g}\n")
