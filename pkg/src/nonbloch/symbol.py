"""Bloch symbols as Laurent polynomials in beta = e^{ik}.

A single-band symbol is h(k) = sum_n c_n e^{ink}, stored sparsely by integer
power n.  Multiband symbols are small square matrices of Laurent symbols.
All derivative and determinant algebra is exact on the coefficients.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def reduce_k(k: complex) -> complex:
    """Wrap Re(k) into [0, 2pi); momenta live on a cylinder."""
    return complex(k.real % TWO_PI, k.imag)


def _clean(coeffs: dict[int, complex]) -> dict[int, complex]:
    out = {int(n): complex(c) for n, c in coeffs.items() if c != 0}
    for c in out.values():
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError("non-finite coefficient")
    return out


@dataclass(frozen=True)
class LaurentSymbol:
    """h(k) = sum_n c_n e^{ink} with n in [-q, p]."""

    coeffs: dict[int, complex]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _clean(self.coeffs))
        if not self.coeffs:
            raise ValueError("symbol must have at least one nonzero coefficient")

    @property
    def p(self) -> int:
        """Maximum nonzero power (leftward hopping range)."""
        return max(max(self.coeffs), 0)

    @property
    def q(self) -> int:
        """Negative of the minimum nonzero power (rightward hopping range)."""
        return max(-min(self.coeffs), 0)

    @property
    def scale(self) -> float:
        return max(abs(c) for c in self.coeffs.values())

    def __call__(self, k):
        """Evaluate at (complex, possibly array-valued) momentum k."""
        k = np.asarray(k, dtype=complex)
        out = np.zeros_like(k)
        for n, c in self.coeffs.items():
            out = out + c * np.exp(1j * n * k)
        if out.ndim == 0:
            return complex(out)
        return out

    def eval_beta(self, beta):
        beta = np.asarray(beta, dtype=complex)
        out = np.zeros_like(beta)
        for n, c in self.coeffs.items():
            out = out + c * beta**n
        if out.ndim == 0:
            return complex(out)
        return out

    def derivative(self) -> "LaurentSymbol":
        """dh/dk, exactly: coefficient map {n: i n c_n}."""
        return _derivative(self)

    def beta_poly(self, shift: complex = 0.0) -> np.ndarray:
        """Coefficients of beta^q (h(beta) - shift), highest power first.

        The returned array has degree p + q and is suitable for np.roots.
        """
        p, q = self.p, self.q
        arr = np.zeros(p + q + 1, dtype=complex)
        for n, c in self.coeffs.items():
            arr[p - n] = c
        arr[p] -= shift
        return arr

    # Laurent ring operations (used by multiband determinants).
    def __add__(self, other):
        other = _as_symbol(other)
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            out[n] = out.get(n, 0) + c
        return LaurentSymbol(out) if any(v != 0 for v in out.values()) else ZERO

    def __sub__(self, other):
        return self + (-_as_symbol(other))

    def __neg__(self):
        return LaurentSymbol({n: -c for n, c in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            if other == 0:
                return ZERO
            return LaurentSymbol({n: c * other for n, c in self.coeffs.items()})
        out: dict[int, complex] = {}
        for n1, c1 in self.coeffs.items():
            for n2, c2 in other.coeffs.items():
                out[n1 + n2] = out.get(n1 + n2, 0) + c1 * c2
        return LaurentSymbol(out) if any(v != 0 for v in out.values()) else ZERO

    __rmul__ = __mul__


class _Zero(LaurentSymbol):
    """Additive identity; bypasses the nonzero-coefficient invariant."""

    def __init__(self):
        object.__setattr__(self, "coeffs", {})

    def __call__(self, k):
        k = np.asarray(k, dtype=complex)
        return 0j if k.ndim == 0 else np.zeros_like(k)

    eval_beta = __call__

    def __neg__(self):
        return self

    @property
    def p(self):
        return 0

    @property
    def q(self):
        return 0


ZERO = _Zero()


def _as_symbol(x) -> LaurentSymbol:
    if isinstance(x, LaurentSymbol):
        return x
    if x == 0:
        return ZERO
    return LaurentSymbol({0: complex(x)})


def _derivative(sym: LaurentSymbol) -> LaurentSymbol:
    out = {n: 1j * n * c for n, c in sym.coeffs.items() if n != 0}
    return LaurentSymbol(out) if out else ZERO


@dataclass(frozen=True)
class MultibandSymbol:
    """m x m matrix of Laurent symbols."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(_as_symbol(e) for e in row) for row in self.entries)
        m = len(rows)
        if m < 1 or any(len(r) != m for r in rows):
            raise ValueError("entries must form a square matrix")
        object.__setattr__(self, "entries", rows)

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def p(self) -> int:
        return max(e.p for row in self.entries for e in row)

    @property
    def q(self) -> int:
        return max(e.q for row in self.entries for e in row)

    def __call__(self, k) -> np.ndarray:
        """Dense m x m matrix h(k) at a scalar momentum."""
        return np.array([[e(k) for e in row] for row in self.entries], dtype=complex)

    def block(self, n: int) -> np.ndarray:
        """Hopping matrix c_n (coefficient of e^{ink}) as a dense block."""
        return np.array(
            [[row[j].coeffs.get(n, 0j) for j in range(self.m)] for row in self.entries],
            dtype=complex,
        )

    def det(self) -> LaurentSymbol:
        """det h(beta) as a Laurent symbol (cofactor expansion)."""
        return _det([list(row) for row in self.entries])


def _det(mat) -> LaurentSymbol:
    m = len(mat)
    if m == 1:
        return mat[0][0]
    acc = ZERO
    for j in range(m):
        minor = [row[:j] + row[j + 1 :] for row in mat[1:]]
        term = mat[0][j] * _det(minor)
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def char_poly(sym: MultibandSymbol, E: complex) -> LaurentSymbol:
    """det[h(beta) - E I] as a Laurent polynomial in beta (m <= 4)."""
    if sym.m > 4:
        raise ValueError("char_poly supports m <= 4")
    shifted = [
        [sym.entries[i][j] - (E if i == j else 0) for j in range(sym.m)]
        for i in range(sym.m)
    ]
    return _det(shifted)


class BivarPoly:
    """Polynomial in (beta, E), Laurent in beta: dict[(n, j)] -> coeff.

    Backs the multiband saddle system f(beta, E) = 0 where f is the
    characteristic determinant with E kept symbolic.
    """

    def __init__(self, coeffs: dict):
        self.coeffs = {k: complex(v) for k, v in coeffs.items() if v != 0}

    def __add__(self, other):
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0) + c
        return BivarPoly(out)

    def __sub__(self, other):
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0) - c
        return BivarPoly(out)

    def __neg__(self):
        return BivarPoly({k: -c for k, c in self.coeffs.items()})

    def __mul__(self, other):
        out: dict = {}
        for (n1, j1), c1 in self.coeffs.items():
            for (n2, j2), c2 in other.coeffs.items():
                key = (n1 + n2, j1 + j2)
                out[key] = out.get(key, 0) + c1 * c2
        return BivarPoly(out)

    def d_beta(self):
        return BivarPoly({(n - 1, j): n * c for (n, j), c in self.coeffs.items() if n != 0})

    def d_E(self):
        return BivarPoly({(n, j - 1): j * c for (n, j), c in self.coeffs.items() if j != 0})

    def __call__(self, beta: complex, E: complex) -> complex:
        return sum(c * beta**n * E**j for (n, j), c in self.coeffs.items())

    def eval_E_poly(self, E: complex) -> LaurentSymbol:
        out: dict[int, complex] = {}
        for (n, j), c in self.coeffs.items():
            out[n] = out.get(n, 0) + c * E**j
        out = {n: c for n, c in out.items() if c != 0}
        return LaurentSymbol(out) if out else ZERO


def char_bivar(sym: MultibandSymbol) -> BivarPoly:
    """det[h(beta) - E I] with E symbolic."""
    mat = [
        [
            BivarPoly({(n, 0): c for n, c in sym.entries[i][j].coeffs.items()})
            - (BivarPoly({(0, 1): 1.0}) if i == j else BivarPoly({}))
            for j in range(sym.m)
        ]
        for i in range(sym.m)
    ]

    def det(rows):
        if len(rows) == 1:
            return rows[0][0]
        acc = BivarPoly({})
        for j in range(len(rows)):
            minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
            term = rows[0][j] * det(minor)
            acc = acc + term if j % 2 == 0 else acc - term
        return acc

    return det(mat)


# ---------------------------------------------------------------------------
# Model presets (figure-caption parameter sets) and model-file parsing.

def _eq1(t1L, t1R, t2L, t2R, kappa) -> LaurentSymbol:
    return LaurentSymbol({1: t1L, -1: t1R, 2: t2L, -2: t2R, 0: -1j * kappa})


def _h1(t1, t2, t3, g1, g2, kappa) -> MultibandSymbol:
    r_plus = LaurentSymbol({1: t3, -1: t2 - g2 / 2, 0: t1 + g1 / 2})
    r_minus = LaurentSymbol({-1: t3, 1: t2 + g2 / 2, 0: t1 - g1 / 2})
    diag = LaurentSymbol({0: -1j * kappa})
    return MultibandSymbol(((diag, r_plus), (r_minus, diag)))


def _h2(a1, am1, b1, bm1, kappa) -> MultibandSymbol:
    A = LaurentSymbol({1: a1, -1: am1})
    B = LaurentSymbol({1: b1, -1: bm1})
    diag = 0.5 * (A + B - 1j * kappa)
    off = 0.5 * (A - B)
    # sigma_y off-diagonal structure: [[d, -i off], [i off, d]]
    return MultibandSymbol(((diag, -1j * off), (1j * off, diag)))


def _h3(tL, tR, V, delta, kappa) -> MultibandSymbol:
    up = LaurentSymbol({1: tL, -1: tR, 0: V - 1j * kappa})
    dn = LaurentSymbol({1: tR, -1: tL, 0: -V - 1j * kappa})
    d = LaurentSymbol({0: delta})
    return MultibandSymbol(((up, d), (d, dn)))


_PRESET_BUILDERS = {
    "fig2a": lambda: _eq1(1.2j, -0.8j, 0.35j, 0.05j, 0.35),
    "fig2b": lambda: _eq1(1.2j, -0.8j, 0.6j, 0.1j, 0.7),
    "fig4e": lambda: _eq1(2.05j, -0.95j, 0.85j, -0.15j, 0.15),
    "fig6a": lambda: _eq1(1.2j, -0.8j, 0.35j, 0.05j, 0.0),
    "fig6e": lambda: _eq1(2.05j, -0.95j, 0.85j, -0.15j, -0.2),
    "fig7": lambda: _eq1(1.2j, -0.8j, 0.6j, 0.1j, 0.7),
    "figS3a": lambda: _h1(0.1, 0.4, 0.1j, 0.2, 0.2, 0.3),
    "figS3b": lambda: _h2(0.2, 0.6, 0.2 + 0.8j, 0.3, 2.0),
    "figS3c": lambda: _h3(1.4, 0.6, 0.5, 1e-4, 0.5),
}

# Figure-panel aliases: Fig. 3(a-d) shares fig2b parameters, Fig. 3(e-h) and
# Fig. 4(e-h) share fig4e parameters, Fig. 4(a-d) shares fig2a parameters.
_ALIASES = {}
for _panel in "abcd":
    _ALIASES[f"fig3{_panel}"] = "fig2b"
    _ALIASES[f"fig4{_panel}"] = "fig2a"
for _panel in "efgh":
    _ALIASES[f"fig3{_panel}"] = "fig4e"
    _ALIASES[f"fig4{_panel}"] = "fig4e"

PRESETS = tuple(sorted(_PRESET_BUILDERS))


def preset(name: str):
    """Return the symbol for a named parameter set (figure captions)."""
    key = _ALIASES.get(name, name)
    try:
        return _PRESET_BUILDERS[key]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


def from_model_dict(data: dict):
    """Build a symbol from {"bands": m, "coeffs": [{row, col, power, re, im}]}."""
    m = int(data.get("bands", 1))
    table: dict[tuple[int, int], dict[int, complex]] = {}
    for item in data["coeffs"]:
        r, c = int(item.get("row", 0)), int(item.get("col", 0))
        n = int(item["power"])
        val = complex(float(item.get("re", 0.0)), float(item.get("im", 0.0)))
        table.setdefault((r, c), {})[n] = table.setdefault((r, c), {}).get(n, 0) + val
    if m == 1:
        return LaurentSymbol(table.get((0, 0), {}))
    entries = [
        [
            LaurentSymbol(table[(i, j)]) if (i, j) in table else ZERO
            for j in range(m)
        ]
        for i in range(m)
    ]
    return MultibandSymbol(tuple(tuple(row) for row in entries))


def load_model(path: str):
    """Load a symbol from a JSON model file, or a named preset."""
    with open(path) as fh:
        return from_model_dict(json.load(fh))
