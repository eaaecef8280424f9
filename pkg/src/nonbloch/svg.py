"""Hand-emitted SVG panels for the CSV files the other modules write.

No plotting dependency: each function assembles path/rect/text elements and
writes a self-contained SVG.  Layout is fixed-size (720x540 canvas with a
margin frame), which keeps re-runs byte-identical.
"""

from __future__ import annotations

import csv
import math

W, H = 720, 540
ML, MR, MT, MB = 80, 30, 40, 60  # margins around the data frame

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class SvgError(Exception):
    pass


def read_csv(path, columns=None):
    """Columns of a numeric CSV as {name: list[float]}; strings pass through."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SvgError(f"{path}: line 1: empty file") from None
        if columns is not None and header != list(columns):
            raise SvgError(f"{path}: line 1: expected columns {list(columns)}, got {header}")
        data = {name: [] for name in header}
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SvgError(f"{path}: line {i}: expected {len(header)} fields, got {len(row)}")
            for name, cell in zip(header, row):
                try:
                    data[name].append(float(cell))
                except ValueError:
                    data[name].append(cell)
    return data


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (1, 2, 2.5, 5, 10) if s * mag >= raw) * mag
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def _fmt(v):
    if v == 0:
        return "0"
    if 1e-3 <= abs(v) < 1e4:
        s = f"{v:.6g}"
        return s
    return f"{v:.2e}"


class Panel:
    """One framed x/y panel accumulating SVG elements."""

    def __init__(self, xlim, ylim, xlabel="", ylabel="", title=""):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.body: list[str] = []
        self._frame(xlabel, ylabel, title)

    def px(self, x):
        return ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        return H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def _frame(self, xlabel, ylabel, title):
        b = self.body
        b.append(f'<rect x="{ML}" y="{MT}" width="{W-ML-MR}" height="{H-MT-MB}" '
                 'fill="none" stroke="#000" stroke-width="1"/>')
        for t in _ticks(self.x0, self.x1):
            px = self.px(t)
            if ML - 1 <= px <= W - MR + 1:
                b.append(f'<line x1="{px:.1f}" y1="{H-MB}" x2="{px:.1f}" y2="{H-MB+5}" stroke="#000"/>')
                b.append(f'<text x="{px:.1f}" y="{H-MB+20}" font-size="12" '
                         f'text-anchor="middle">{_fmt(t)}</text>')
        for t in _ticks(self.y0, self.y1):
            py = self.py(t)
            if MT - 1 <= py <= H - MB + 1:
                b.append(f'<line x1="{ML-5}" y1="{py:.1f}" x2="{ML}" y2="{py:.1f}" stroke="#000"/>')
                b.append(f'<text x="{ML-8}" y="{py+4:.1f}" font-size="12" '
                         f'text-anchor="end">{_fmt(t)}</text>')
        if xlabel:
            b.append(f'<text x="{(ML+W-MR)/2}" y="{H-15}" font-size="14" '
                     f'text-anchor="middle">{xlabel}</text>')
        if ylabel:
            b.append(f'<text x="20" y="{(MT+H-MB)/2}" font-size="14" text-anchor="middle" '
                     f'transform="rotate(-90 20 {(MT+H-MB)/2})">{ylabel}</text>')
        if title:
            b.append(f'<text x="{(ML+W-MR)/2}" y="{MT-12}" font-size="15" '
                     f'text-anchor="middle">{title}</text>')

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(
            f"{self.px(x):.2f},{self.py(y):.2f}"
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y)
        )
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="{width}"{d}/>')

    def dots(self, xs, ys, color, r=2.5):
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                self.body.append(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
                                 f'r="{r}" fill="{color}"/>')

    def rect(self, x, y, w, h, color):
        px, py = self.px(x), self.py(y + h)
        pw = self.px(x + w) - px
        ph = self.py(y) - py
        self.body.append(f'<rect x="{px:.2f}" y="{py:.2f}" width="{pw:.2f}" '
                         f'height="{ph:.2f}" fill="{color}" stroke="none"/>')

    def text(self, x, y, s, color="#000", size=13):
        self.body.append(f'<text x="{self.px(x):.1f}" y="{self.py(y):.1f}" '
                         f'font-size="{size}" fill="{color}">{s}</text>')

    def legend(self, entries):
        for i, (label, color) in enumerate(entries):
            y = MT + 18 + 18 * i
            self.body.append(f'<line x1="{W-MR-150}" y1="{y}" x2="{W-MR-120}" y2="{y}" '
                             f'stroke="{color}" stroke-width="2"/>')
            self.body.append(f'<text x="{W-MR-112}" y="{y+4}" font-size="12">{label}</text>')

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                     f'viewBox="0 0 {W} {H}">\n<rect width="{W}" height="{H}" fill="#fff"/>\n')
            fh.write("\n".join(self.body))
            fh.write("\n</svg>\n")


def _finite_range(vals):
    vv = [v for v in vals if isinstance(v, float) and math.isfinite(v)]
    if not vv:
        raise SvgError("no finite values to plot")
    lo, hi = min(vv), max(vv)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    return lo - pad, hi + pad


def plot_trace(csv_path, out_path, report: dict | None = None):
    """ln|psi_x0| and ln||psi|| against t, with fit-line overlays if a
    report dict (as in report.json) is supplied."""
    data = read_csv(csv_path, ("t", "log_amp_x0", "log_norm"))
    t = data["t"]
    ylo, yhi = _finite_range(data["log_amp_x0"] + data["log_norm"])
    p = Panel((t[0], t[-1]), (ylo, yhi), "t", "ln amplitude", "edge amplitude and norm")
    p.polyline(t, data["log_amp_x0"], _COLORS[0])
    p.polyline(t, data["log_norm"], _COLORS[2])
    entries = [("ln|psi_x0|", _COLORS[0]), ("ln||psi||", _COLORS[1])]
    if report:
        for key, color in (("lambda_fit", _COLORS[1]), ("mu_fit", _COLORS[3])):
            fit = report.get(key)
            if not fit:
                continue
            (a, b), s, c = fit["window"], fit["slope"], fit["intercept"]
            p.polyline([a, b], [s * a + c, s * b + c], color, width=2.5)
            p.text(b, s * b + c, f"slope {s:.4f}", color)
            entries.append((key.replace("_", " "), color))
    p.legend(entries)
    p.write(out_path)


def plot_spectra(csv_path, out_path):
    data = read_csv(csv_path, ("re", "im", "kind"))
    xlim = _finite_range(data["re"])
    ylim = _finite_range(data["im"])
    p = Panel(xlim, ylim, "Re E", "Im E", "OBC and PBC spectra")
    for kind, color in (("pbc", _COLORS[0]), ("obc", _COLORS[1])):
        xs = [x for x, k in zip(data["re"], data["kind"]) if k == kind]
        ys = [y for y, k in zip(data["im"], data["kind"]) if k == kind]
        p.dots(xs, ys, color, r=2.0)
    p.legend([("PBC", _COLORS[0]), ("OBC", _COLORS[1])])
    p.write(out_path)


def plot_lambda_v(csv_path, out_path):
    data = read_csv(csv_path, ("v", "lambda"))
    v, lam = data["v"], data["lambda"]
    i = max(range(len(lam)), key=lambda j: lam[j])
    p = Panel((v[0], v[-1]), _finite_range(lam), "v", "lambda(v)", "drift-frame decay rate")
    p.polyline(v, lam, _COLORS[0], width=2.0)
    p.dots([v[i]], [lam[i]], _COLORS[1], r=4.0)
    p.text(v[i], lam[i], f" v_peak={v[i]:.3f}, lambda={lam[i]:.4f}", _COLORS[1])
    p.write(out_path)


def _gray(frac):
    # light -> dark blue ramp
    r = int(247 - 211 * frac)
    g = int(251 - 176 * frac)
    b = int(255 - 71 * frac)
    return f"#{r:02x}{g:02x}{b:02x}"


def plot_heatmap(csv_path, out_path):
    data = read_csv(csv_path, ("t", "x", "amp"))
    ts = sorted(set(data["t"]))
    xs = sorted(set(data["x"]))
    dt = ts[1] - ts[0] if len(ts) > 1 else 1.0
    dx = xs[1] - xs[0] if len(xs) > 1 else 1.0
    p = Panel((xs[0], xs[-1] + dx), (ts[0], ts[-1] + dt), "site x", "t",
              "profile |psi_x(t)| (each row peak-normalized)")
    for t, x, a in zip(data["t"], data["x"], data["amp"]):
        if a > 1e-3:
            p.rect(x, t, dx, dt, _gray(min(1.0, a)))
    p.write(out_path)


def plot_healing(csv_path, out_path):
    data = read_csv(csv_path, ("t", "epsilon", "log_norm_phi", "log_norm_xi"))
    t = data["t"]
    ln_eps = [math.log(max(e, 1e-300)) for e in data["epsilon"]]
    p = Panel((t[0], t[-1]), _finite_range(ln_eps), "t", "ln epsilon(t)",
              "deviation from the phase-evolved initial state")
    p.polyline(t, ln_eps, _COLORS[0], width=2.0)
    p.write(out_path)


PLOTTERS = {
    "trace": plot_trace,
    "spectra": plot_spectra,
    "lambda_v": plot_lambda_v,
    "heatmap": plot_heatmap,
    "healing": plot_healing,
}
