"""Semi-infinite-boundary eigenstates on a finite lattice and self-healing runs.

An SIBC eigenstate at energy E0 (winding one) is built from the three
roots of h(beta) = E0 inside the unit circle; two left-edge boundary
equations fix the coefficients up to normalization.  The healing
experiment evolves it through a three-phase schedule H, H+V, H with a
lossy potential V = -i*gamma on the first l sites and tracks
epsilon(t) = ||psi(t) - e^{-i E0 t} psi0||^2 / ||e^{-i E0 t} psi0||^2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lattice import assemble
from .symbol import LaurentSymbol, TWO_PI


class HealingError(Exception):
    pass


@dataclass(frozen=True)
class SibcState:
    E0: complex
    betas: np.ndarray            # the |beta| < 1 roots used
    coeffs: np.ndarray           # c_1..c_3
    psi0: np.ndarray             # normalized state on L sites
    residual: float              # max interior |(H psi0 - E0 psi0)_x|


@dataclass
class HealingReport:
    E0: complex
    threshold: float             # lambda_tot = max[Im(S_d), Im(P)]
    times: np.ndarray
    epsilon: np.ndarray
    log_norm_phi: np.ndarray
    log_norm_xi: np.ndarray
    slope: float                 # late-time slope of ln(epsilon), bias-corrected
    slope_raw: float             # uncorrected least-squares slope
    verdict: str                 # "heals" | "not_healing"
    horizon_reached: bool

    def as_dict(self) -> dict:
        return {
            "E0": [self.E0.real, self.E0.imag],
            "threshold": self.threshold,
            "slope": self.slope,
            "slope_raw": self.slope_raw,
            "verdict": self.verdict,
            "horizon_reached": self.horizon_reached,
        }


def winding(sym: LaurentSymbol, E0: complex, samples: int = 4096) -> int:
    """Winding of h(beta) - E0 around the unit circle (argument principle)."""
    ks = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    vals = sym(ks) - E0
    # closer to the curve than one sampling step: the winding is ill-defined
    step = np.abs(sym.derivative()(ks)) * (TWO_PI / samples)
    if np.any(np.abs(vals) < step):
        raise HealingError("E0 on PBC spectrum")
    phase = np.unwrap(np.angle(np.concatenate([vals, vals[:1]])))
    w = (phase[-1] - phase[0]) / TWO_PI
    if abs(w - round(w)) > 1e-3:
        raise HealingError("winding did not converge to an integer")
    return int(round(w))


def build_sibc(sym: LaurentSymbol, E0: complex, L: int) -> SibcState:
    """SIBC eigenstate psi0(x) = sum_j c_j beta_j^x, x = 1..L."""
    if sym.p != 2 or sym.q != 2:
        raise HealingError("SIBC construction requires hopping range two")
    if L < 200:
        raise HealingError("SIBC emulation needs L >= 200")
    if winding(sym, E0) != 1:
        raise HealingError("winding at E0 is not one")
    roots = np.roots(sym.beta_poly(shift=E0))
    roots = roots[np.argsort(np.abs(roots))]
    if abs(abs(roots[2]) - abs(roots[3])) < 1e-8:
        raise HealingError("E0 at GBZ boundary")
    betas = roots[:3]
    # the eigen-equation at sites 1 and 2 is missing the hops to sites
    # 0 and -1; demanding those continuations cancel gives two conditions
    c1 = sym.coeffs.get(-1, 0.0)
    c2 = sym.coeffs.get(-2, 0.0)
    M = np.array([
        [c1 + c2 / b for b in betas],
        [c2 * np.ones(3, complex)][0],
    ], dtype=complex)
    _, s, vh = np.linalg.svd(M)
    if s[1] / max(s[0], 1e-300) < 1e-10:
        raise HealingError("boundary system degenerate")
    c = vh[-1].conj()
    x = np.arange(1, L + 1)
    psi0 = (c[None, :] * betas[None, :] ** x[:, None]).sum(axis=1)
    nrm = np.linalg.norm(psi0)
    if nrm == 0:
        raise HealingError("boundary system degenerate")
    psi0 = psi0 / nrm
    H = assemble(sym, L, "obc").matrix
    r = H @ psi0 - E0 * psi0
    residual = float(np.max(np.abs(r[: L - 8])))
    return SibcState(complex(E0), betas, c / nrm, psi0, residual)


def _phase_propagate(psi, U, n_steps, dt, t0, sample_every, out_t, out_psi,
                     out_scale, scale):
    """March psi with the fixed-step propagator U, appending samples."""
    for j in range(n_steps):
        psi = U @ psi
        nrm = np.linalg.norm(psi)
        if nrm > 1e140 or (0.0 < nrm < 1e-140):
            psi = psi / nrm
            scale += math.log(nrm)
        if (j + 1) % sample_every == 0:
            out_t.append(t0 + (j + 1) * dt)
            out_psi.append(psi.copy())
            out_scale.append(scale)
    return psi, scale


def _threshold_parts(sym: LaurentSymbol) -> tuple[float, bool]:
    """(max[Im(S_d), Im(P)], sticky?) -- sticky when the dominant saddle
    beats every travelling peak, so deviations stay pinned to the edge."""
    from .dynamics import find_P
    from .thimble import classify

    lam_d = classify(sym, 0.0, "bz").dominant.S.imag
    found = find_P(sym)
    lam_p = found[1].imag if found is not None else -math.inf
    return float(max(lam_d, lam_p)), lam_d >= lam_p


def threshold_lambda_tot(sym: LaurentSymbol) -> float:
    """max[Im(S_d), Im(P)] -- the self-healing energy threshold."""
    return _threshold_parts(sym)[0]


def run_healing(
    sym: LaurentSymbol,
    E0: complex,
    L: int = 600,
    gamma: float = 10.0,
    l: int = 10,
    t1: float = 2.0,
    t2: float = 4.0,
    t_end: float = 80.0,
    dt: float = 0.01,
    sample_every: int = 5,
    v_offset: int = 0,
    threshold: float | None = None,
    sticky: bool | None = None,
    sibc: SibcState | None = None,
) -> HealingReport:
    """Three-phase evolution H, H+V, H of an SIBC eigenstate at E0."""
    if not (t1 < t2 < t_end):
        raise HealingError("need t1 < t2 < t_end")
    if l + v_offset >= L:
        raise HealingError("lossy region exceeds lattice")
    state = sibc if sibc is not None else build_sibc(sym, E0, L)
    if threshold is None or sticky is None:
        threshold, sticky = _threshold_parts(sym)
    H = assemble(sym, L, "obc").matrix
    V = np.zeros(L, complex)
    V[v_offset: v_offset + l] = -1j * gamma
    U = scipy.linalg.expm(-1j * H * dt)
    UV = scipy.linalg.expm(-1j * (H + np.diag(V)) * dt)

    out_t: list[float] = [0.0]
    out_psi: list[np.ndarray] = [state.psi0.copy()]
    out_scale: list[float] = [0.0]
    psi, scale = state.psi0.copy(), 0.0
    n1 = int(round(t1 / dt))
    n2 = int(round((t2 - t1) / dt))
    n3 = int(round((t_end - t2) / dt))
    psi, scale = _phase_propagate(psi, U, n1, dt, 0.0, sample_every,
                                  out_t, out_psi, out_scale, scale)
    psi, scale = _phase_propagate(psi, UV, n2, dt, n1 * dt, sample_every,
                                  out_t, out_psi, out_scale, scale)
    psi, scale = _phase_propagate(psi, U, n3, dt, (n1 + n2) * dt, sample_every,
                                  out_t, out_psi, out_scale, scale)

    times = np.asarray(out_t)
    eps = np.empty(len(times))
    log_phi = np.empty(len(times))
    log_xi = np.empty(len(times))
    horizon = False
    n_keep = len(times)
    for i, (t, ps, sc) in enumerate(zip(times, out_psi, out_scale)):
        if np.max(np.abs(ps[L - 5:])) / np.max(np.abs(ps)) > 1e-8:
            horizon = True
            n_keep = i
            break
        # phi(t) = e^{-i E0 t} psi0, expressed in psi's log scale
        log_phi[i] = E0.imag * t
        phi_scaled = state.psi0 * cmath.exp(-1j * E0 * t - sc)
        xi = ps - phi_scaled
        nx = np.linalg.norm(xi)
        log_xi[i] = math.log(nx) + sc if nx > 0 else -math.inf
        eps[i] = math.exp(min(2 * (log_xi[i] - log_phi[i]), 700.0))
    times, eps = times[:n_keep], eps[:n_keep]
    log_phi, log_xi = log_phi[:n_keep], log_xi[:n_keep]

    m = (times >= t2 + 2.0) & np.isfinite(np.log(np.maximum(eps, 1e-300)))
    if m.sum() < 10:
        raise HealingError("insufficient trace after t2 for the verdict fit")
    tm = times[m]
    slope_raw = float(np.polyfit(tm, np.log(eps[m]), 1)[0])
    # the deviation norm carries the edge t^{-3/2} prefactor when sticky
    # (t^{-1/4} when a travelling peak dominates); epsilon doubles the power
    power = 3.0 if sticky else 0.5
    tcen = tm - tm.mean()
    slope = slope_raw + power * float(
        np.dot(tcen, np.log(tm)) / np.dot(tcen, tcen)
    )
    verdict = "heals" if slope < 0 else "not_healing"
    return HealingReport(complex(E0), float(threshold), times, eps,
                         log_phi, log_xi, slope, slope_raw, verdict, horizon)


def scan(
    sym: LaurentSymbol,
    re_E0: float,
    im_values: np.ndarray,
    L: int = 600,
    **kwargs,
) -> list[HealingReport]:
    """Healing verdicts over a vertical line of E0 values."""
    reports = []
    threshold, sticky = _threshold_parts(sym)
    for im in np.asarray(im_values, float):
        reports.append(
            run_healing(sym, complex(re_E0, im), L, threshold=threshold,
                        sticky=sticky, **kwargs)
        )
    return reports


def flip_point(reports: list[HealingReport]) -> float | None:
    """Im(E0) midpoint where the verdict flips, None if it never does."""
    srt = sorted(reports, key=lambda r: r.E0.imag)
    for a, b in zip(srt[:-1], srt[1:]):
        if a.verdict != b.verdict:
            return 0.5 * (a.E0.imag + b.E0.imag)
    return None


def write_healing_csv(path, report: HealingReport):
    with open(path, "w") as fh:
        fh.write("t,epsilon,log_norm_phi,log_norm_xi\n")
        for t, e, p, x in zip(report.times, report.epsilon,
                              report.log_norm_phi, report.log_norm_xi):
            fh.write(f"{t:.12g},{e:.12g},{p:.12g},{x:.12g}\n")


def write_healing_report_json(path, report: HealingReport):
    import json

    with open(path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")
