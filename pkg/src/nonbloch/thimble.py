"""Steepest ascent/descent flows of Im[h(k) - kv] and intersection counting.

The flow field dk/dtau = +/- i conj(H'(k)) / |H'(k)| (H = h - kv) follows
gradients of Im H by the Cauchy-Riemann equations, at unit speed so tau is
arc length.  Ascent paths are intersected with the BZ (or GBZ) to obtain the
coefficients n_sigma; the dominant saddle maximizes Im(S) over n_sigma != 0.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline

from .saddle import SaddlePoint, find_saddles
from .symbol import LaurentSymbol, TWO_PI


class ThimbleError(Exception):
    pass


# termination codes from the integrator
_TERM_WINDOW = 0
_TERM_ARC = 1
_TERM_IM = 2
_TERM_NEAR_SADDLE = 3
_TERM_STEPFAIL = 4
_TERM_NAMES = {
    _TERM_WINDOW: "window_exit",
    _TERM_ARC: "step_limit",
    _TERM_IM: "divergence",
    _TERM_NEAR_SADDLE: "near_saddle",
    _TERM_STEPFAIL: "step_failure",
}


@dataclass(frozen=True)
class FlowPath:
    points: np.ndarray            # complex momenta, unwrapped Re(k)
    kind: str                     # "ascent" | "descent"
    branch: int                   # +1: seeded at phi_a, -1: seeded at phi_a + pi
    termination: str


@dataclass(frozen=True)
class ThimbleClassification:
    saddles: tuple                        # SaddlePoint, ordered by descending Im(S)
    n_sigma: tuple                        # ints, aligned with saddles
    crossings: tuple                      # per saddle: tuple of (point, sign)
    paths: tuple                          # per saddle: (asc+, asc-, desc+, desc-)
    dominant_index: int
    non_generic: bool

    @property
    def dominant(self) -> SaddlePoint:
        return self.saddles[self.dominant_index]


@njit(cache=True)
def _H_and_grad(k, powers, coeffs, v):
    h = 0j
    hp = 0j
    for i in range(len(powers)):
        e = coeffs[i] * cmath.exp(1j * powers[i] * k)
        h += e
        hp += 1j * powers[i] * e
    return h - k * v, hp - v


@njit(cache=True)
def _flow(k, powers, coeffs, v, direction):
    _, hp = _H_and_grad(k, powers, coeffs, v)
    a = abs(hp)
    if a < 1e-300:
        return 0j
    return direction * 1j * hp.conjugate() / a


@njit(cache=True)
def _trace_kernel(k0, powers, coeffs, v, direction, ds, k_max, arc_limit,
                  im_start, delta_max, other_kr, other_ki, max_pts):
    """Adaptive Cash-Karp RK45 at unit speed; returns (points, n, code)."""
    pts = np.empty(max_pts, dtype=np.complex128)
    pts[0] = k0
    n = 1
    k = k0
    arc = 0.0
    h = ds
    code = _TERM_ARC
    two_pi = 2.0 * math.pi
    while arc < arc_limit and n < max_pts:
        # Cash-Karp embedded pair
        k1 = _flow(k, powers, coeffs, v, direction)
        if abs(k1) == 0.0:
            code = _TERM_NEAR_SADDLE
            break
        k2 = _flow(k + h * 0.2 * k1, powers, coeffs, v, direction)
        k3 = _flow(k + h * (0.075 * k1 + 0.225 * k2), powers, coeffs, v, direction)
        k4 = _flow(k + h * (0.3 * k1 - 0.9 * k2 + 1.2 * k3), powers, coeffs, v, direction)
        k5 = _flow(k + h * (-11.0 / 54.0 * k1 + 2.5 * k2 - 70.0 / 27.0 * k3
                            + 35.0 / 27.0 * k4), powers, coeffs, v, direction)
        k6 = _flow(k + h * (1631.0 / 55296.0 * k1 + 175.0 / 512.0 * k2
                            + 575.0 / 13824.0 * k3 + 44275.0 / 110592.0 * k4
                            + 253.0 / 4096.0 * k5), powers, coeffs, v, direction)
        k_new5 = k + h * (37.0 / 378.0 * k1 + 250.0 / 621.0 * k3
                          + 125.0 / 594.0 * k4 + 512.0 / 1771.0 * k6)
        k_new4 = k + h * (2825.0 / 27648.0 * k1 + 18575.0 / 48384.0 * k3
                          + 13525.0 / 55296.0 * k4 + 277.0 / 14336.0 * k5
                          + 0.25 * k6)
        err = abs(k_new5 - k_new4)
        tol = 1e-10 * h
        if err > tol and h > 1e-12:
            h = max(h * max(0.2, 0.9 * (tol / err) ** 0.25), 1e-12)
            continue
        k = k_new5
        arc += h
        pts[n] = k
        n += 1
        if err > 0:
            h = min(ds, h * min(5.0, 0.9 * (tol / err) ** 0.2))
        else:
            h = ds
        if abs(k.imag) > k_max:
            code = _TERM_WINDOW
            break
        Hval, _ = _H_and_grad(k, powers, coeffs, v)
        if direction * (Hval.imag - im_start) > delta_max:
            code = _TERM_IM
            break
        hit = False
        for j in range(len(other_kr)):
            dr = (k.real - other_kr[j]) % two_pi
            if dr > math.pi:
                dr = two_pi - dr
            if math.hypot(dr, k.imag - other_ki[j]) < 1e-4:
                hit = True
                break
        if hit:
            code = _TERM_NEAR_SADDLE
            break
    return pts[:n], n, code


def _symbol_arrays(sym: LaurentSymbol):
    powers = np.array(sorted(sym.coeffs), dtype=np.int64)
    coeffs = np.array([sym.coeffs[int(n)] for n in powers], dtype=np.complex128)
    return powers, coeffs


def seed_angle(s: SaddlePoint) -> float:
    """Local direction maximizing Im[(1/2) h2 dk^2]: (pi/2 - arg h2)/2."""
    return (math.pi / 2 - cmath.phase(s.h2)) / 2.0


def trace_flows(
    s: SaddlePoint,
    sym: LaurentSymbol,
    v: float = 0.0,
    eps: float = 1e-5,
    ds: float = 0.01,
    k_max: float = 6.0,
    arc_limit: float = 200.0,
    delta_max: float = 50.0,
    others: tuple = (),
    kinds: tuple = ("ascent", "descent"),
) -> dict:
    """Trace both branches of the ascent and descent paths leaving s."""
    if s.degenerate:
        raise ThimbleError("Morse assumption violated: degenerate saddle")
    powers, coeffs = _symbol_arrays(sym)
    other_kr = np.array([o.k.real for o in others], float)
    other_ki = np.array([o.k.imag for o in others], float)
    phi_a = seed_angle(s)
    max_pts = int(arc_limit / ds) + 16
    out = {}
    for kind in kinds:
        direction = 1.0 if kind == "ascent" else -1.0
        phi0 = phi_a if kind == "ascent" else phi_a + math.pi / 2
        branches = []
        for br, phi in ((+1, phi0), (-1, phi0 + math.pi)):
            k0 = s.k + eps * cmath.exp(1j * phi)
            pts, _, code = _trace_kernel(
                k0, powers, coeffs, v, direction, ds, k_max, arc_limit,
                s.S.imag, delta_max, other_kr, other_ki, max_pts,
            )
            if code == _TERM_STEPFAIL:
                raise ThimbleError("flow integration step failure")
            branches.append(FlowPath(pts, kind, br, _TERM_NAMES[code]))
        out[kind] = tuple(branches)
    return out


# ---------------------------------------------------------------------------
# Contours and intersection counting.

class BrillouinZone:
    """The circle k_i = 0 oriented along +k_r."""

    def distance(self, k: np.ndarray) -> np.ndarray:
        return np.asarray(k).imag

    def tangent(self, kr: float) -> tuple[float, float]:
        return 1.0, 0.0


class GbzContour:
    """Closed GBZ loop k_i = g(k_r), built from finite-size GBZ points."""

    def __init__(self, betas: np.ndarray, smooth_points: int = 64):
        k = -1j * np.log(np.asarray(betas, complex))
        kr = np.mod(k.real, TWO_PI)
        ki = k.imag
        order = np.argsort(kr)
        kr, ki = kr[order], ki[order]
        # thin near-duplicate abscissae, then close the loop periodically
        keep = np.concatenate([[True], np.diff(kr) > 1e-6])
        kr, ki = kr[keep], ki[keep]
        if len(kr) < 8:
            raise ThimbleError("too few GBZ points for a contour")
        kr = np.concatenate([kr, [kr[0] + TWO_PI]])
        ki = np.concatenate([ki, [ki[0]]])
        self._spline = CubicSpline(kr, ki, bc_type="periodic")
        self._kr0 = kr[0]

    @property
    def breakpoints(self) -> np.ndarray:
        """Spline knot abscissae spanning one full period."""
        return self._spline.x

    def height_raw(self, kr) -> np.ndarray:
        """Spline height without periodic wrapping (kr in knot range)."""
        return self._spline(np.asarray(kr))

    def slope_raw(self, kr) -> np.ndarray:
        return self._spline.derivative()(np.asarray(kr))

    def height(self, kr) -> np.ndarray:
        return self._spline(self._kr0 + np.mod(np.asarray(kr) - self._kr0, TWO_PI))

    def distance(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k)
        return k.imag - self.height(k.real)

    def tangent(self, kr: float) -> tuple[float, float]:
        g = self._spline.derivative()(self._kr0 + (kr - self._kr0) % TWO_PI)
        n = math.hypot(1.0, float(g))
        return 1.0 / n, float(g) / n


def count_intersections(path: FlowPath, contour) -> list[tuple[complex, int]]:
    """Signed transversal crossings of an oriented flow branch with a contour.

    The branch is taken in its outward parameterization; callers account for
    the orientation of the full ascent curve (branch -1 reversed).
    """
    pts = path.points
    if len(pts) < 2:
        return []
    d = np.asarray(contour.distance(pts), float)
    if np.any(np.abs(d) < 1e-12):
        raise ThimbleError("non-transversal crossing: path point on contour")
    hits = []
    sign_change = np.where(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
    for i in sign_change:
        a, b = pts[i], pts[i + 1]
        lo, hi = 0.0, 1.0
        dlo = d[i]
        for _ in range(60):  # bisection to 1e-10 on the segment parameter
            mid = 0.5 * (lo + hi)
            dm = float(contour.distance(np.array([a + mid * (b - a)]))[0])
            if dm == 0.0:
                lo = hi = mid
                break
            if (dm > 0) == (dlo > 0):
                lo, dlo = mid, dm
            else:
                hi = mid
            if hi - lo < 1e-10:
                break
        point = a + 0.5 * (lo + hi) * (b - a)
        tx, ty = contour.tangent(point.real)
        dk = b - a
        cross = tx * dk.imag - ty * dk.real
        hits.append((point, 1 if cross > 0 else -1))
    return hits


def classify(
    sym: LaurentSymbol,
    v: float = 0.0,
    contour: str = "bz",
    gbz_betas=None,
    eps: float = 1e-5,
    trace_kwargs: dict | None = None,
) -> ThimbleClassification:
    """n_sigma for every saddle of h(k) - kv and the dominant-saddle choice."""
    saddles = find_saddles(sym, v)
    if contour == "bz":
        cont = BrillouinZone()
    elif contour == "gbz":
        if gbz_betas is None:
            raise ValueError("gbz contour requires gbz_betas")
        cont = GbzContour(gbz_betas)
    else:
        raise ValueError(f"unknown contour {contour!r}")

    kwargs = dict(trace_kwargs or {})
    n_list, crossings, path_list = [], [], []
    non_generic = False
    for s in saddles:
        others = tuple(o for o in saddles if o is not s)
        current_eps = eps
        for attempt in range(4):
            flows = trace_flows(s, sym, v, eps=current_eps, others=others, **kwargs)
            try:
                hits_plus = count_intersections(flows["ascent"][0], cont)
                hits_minus = count_intersections(flows["ascent"][1], cont)
                break
            except ThimbleError:
                if attempt == 3:
                    raise ThimbleError("non-transversal crossing after 3 retries")
                current_eps *= 3.0
        # Saddles can sit on the contour itself (GBZ passes through the
        # branch points of the open-boundary spectrum).  There the ascent
        # curve pierces the contour at the saddle, which segment-based
        # sign-change counting cannot see; count that crossing explicitly
        # and drop any near-saddle hits produced by the seed offset.
        on_contour = 0
        d0 = float(np.asarray(cont.distance(np.array([s.k])))[0])
        if abs(d0) < 1e-4:
            r_ex = max(10.0 * current_eps, 1e-3)
            hits_plus = [h for h in hits_plus if abs(h[0] - s.k) > r_ex]
            hits_minus = [h for h in hits_minus if abs(h[0] - s.k) > r_ex]
            dk = cmath.exp(1j * seed_angle(s))
            tx, ty = cont.tangent(s.k.real)
            cross = tx * dk.imag - ty * dk.real
            if abs(cross) < 1e-9:
                raise ThimbleError(
                    "non-transversal crossing: ascent tangent to contour at saddle"
                )
            on_contour = 1 if cross > 0 else -1
        # ascent curve oriented branch- (reversed) -> saddle -> branch+
        n = (sum(sgn for _, sgn in hits_plus)
             - sum(sgn for _, sgn in hits_minus) + on_contour)
        all_hits = [(p, sgn) for p, sgn in hits_plus] + [
            (p, -sgn) for p, sgn in hits_minus
        ]
        if any(fp.termination == "near_saddle" for fp in flows["ascent"]):
            non_generic = True
        n_list.append(n)
        crossings.append(tuple(all_hits))
        path_list.append(
            (flows["ascent"][0], flows["ascent"][1],
             flows["descent"][0], flows["descent"][1])
        )
    contributing = [i for i, n in enumerate(n_list) if n != 0]
    if not contributing:
        raise ThimbleError("no contributing saddle")
    dominant = max(contributing, key=lambda i: saddles[i].S.imag)
    return ThimbleClassification(
        tuple(saddles), tuple(n_list), tuple(crossings), tuple(path_list),
        dominant, non_generic,
    )


# ---------------------------------------------------------------------------
# Thimble-decomposition quadrature (plumbing check of contour bookkeeping).

def bz_integral(sym: LaurentSymbol, t: float, samples: int = 8192) -> complex:
    """(1/2pi) Int_BZ e^{-i h(k) t} dk by periodic trapezoid."""
    ks = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    return complex(np.mean(np.exp(-1j * sym(ks) * t)))


def contour_integral(sym: LaurentSymbol, kr, ki, t: float) -> complex:
    """(1/2pi) Int e^{-i h(k) t} dk along the sampled periodic curve ki(kr)."""
    k = np.asarray(kr) + 1j * np.asarray(ki)
    f = np.exp(-1j * sym(k) * t)
    return complex(np.trapezoid(f, k) / TWO_PI)


def gbz_integral(sym: LaurentSymbol, cont: GbzContour, t: float,
                 order: int = 12) -> complex:
    """(1/2pi) Int e^{-i h(k) t} dk along the GBZ spline contour.

    The integrand is entire, so the value is contour-independent; accuracy
    is limited only by quadrature.  Composite Gauss-Legendre per spline
    interval keeps nodes away from the C^2 breakpoints of the spline.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    xs = cont.breakpoints
    total = 0j
    for a, b in zip(xs[:-1], xs[1:]):
        half = 0.5 * (b - a)
        kr = 0.5 * (a + b) + half * nodes
        ki = cont.height_raw(kr)
        g = cont.slope_raw(kr)
        k = kr + 1j * ki
        f = np.exp(-1j * sym(k) * t) * (1.0 + 1j * g)
        total += half * np.sum(weights * f)
    return complex(total / TWO_PI)


def descent_integral(s: SaddlePoint, paths, sym: LaurentSymbol, v: float,
                     t: float) -> complex:
    """(1/2pi) Int_{D_sigma} e^{-i (h - kv) t} dk with D oriented so that its
    pairing with the ascent curve is +1 (reverse of branch +, then branch -)."""
    desc_plus, desc_minus = paths
    total = 0j
    for fp, orient in ((desc_plus, -1.0), (desc_minus, +1.0)):
        k = np.concatenate([[s.k], fp.points])  # close the eps gap at the saddle
        f = np.exp(-1j * (sym(k) - k * v) * t)
        total += orient * np.trapezoid(f, k)
    return complex(total / TWO_PI)


def decomposition_pair(sym: LaurentSymbol, t: float, cls: ThimbleClassification,
                       v: float = 0.0, samples: int = 8192, ds: float = 0.0015):
    """(direct BZ integral, thimble-sum integral) at time t.

    Descent paths are retraced at quadrature resolution `ds`, denser than the
    classification traces need.
    """
    direct = bz_integral(sym, t, samples)
    total = 0j
    for i, (s, n) in enumerate(zip(cls.saddles, cls.n_sigma)):
        if n == 0:
            continue
        others = tuple(o for o in cls.saddles if o is not s)
        flows = trace_flows(s, sym, v, eps=1e-6, ds=ds, others=others,
                            kinds=("descent",))
        total += n * descent_integral(s, flows["descent"], sym, v, t)
    return direct, total


def write_thimbles_csv(path, cls: ThimbleClassification):
    with open(path, "w") as fh:
        fh.write("saddle,branch,kind,re_k,im_k\n")
        for i, paths in enumerate(cls.paths):
            for fp in paths:
                for k in fp.points:
                    fh.write(f"{i},{fp.branch},{fp.kind},{k.real:.9g},{k.imag:.9g}\n")


def write_classification_json(path, cls: ThimbleClassification):
    data = {
        "saddles": [
            {
                "k": [s.k.real, s.k.imag],
                "S": [s.S.real, s.S.imag],
                "n_sigma": n,
            }
            for s, n in zip(cls.saddles, cls.n_sigma)
        ],
        "dominant": cls.dominant_index,
        "non_generic": cls.non_generic,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
