"""Configuration-driven experiment runner and plot emitter.

`nonbloch run` executes one or more analysis tasks for a preset or an
inline model and writes CSV/JSON artifacts plus a manifest recording the
config hash, library versions, and every prediction/fit pair.  In --check
mode the run exits nonzero when any pair misses its tolerance.
`nonbloch plot` renders the emitted CSVs as self-contained SVGs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .symbol import MultibandSymbol, from_model_dict, preset as load_preset


class ConfigError(Exception):
    pass


_TASKS = ("spectra", "saddles", "thimbles", "evolve", "lambda_v", "crossover",
          "healing", "multiband")

# paper-caption defaults for the healing presets
_HEALING_E0 = {"fig6a": -1.0 + 0.05j, "fig6e": -1.667 + 0.2j}

# tolerance table (acceptance criteria); overridable per config
_DEFAULT_TOL = {
    "lambda_vs_saddle": 0.02,
    "lambda_tot_vs_pred": 0.02,
    "mu_vs_O": 0.005,
    "mu_tot_vs_O": 0.005,
    "v_peak_vs_vP": 0.02,
    "t_c_ratio": 0.2,
    "lambda_vs_branch_saddle": 0.03,
    "mu_vs_O_multiband": 0.01,
    "verdict_vs_threshold": 0.5,
}

_HEALING_KEYS = {"E0", "re_E0", "im_values", "gamma", "l", "t1", "t2",
                 "t_end", "dt", "L"}


@dataclass
class ExperimentConfig:
    preset: str | None = None
    model: dict | None = None
    tasks: tuple = ()
    L: int | None = None
    spans: float = 8.0
    x0: int = 0
    state: str = "delta"
    state_width: int = 40
    out: str = "results"
    healing: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if (cfg.preset is None) == (cfg.model is None):
            raise ConfigError("config needs exactly one of 'preset' or 'model'")
        cfg.tasks = tuple(cfg.tasks)
        for t in cfg.tasks:
            if t not in _TASKS:
                raise ConfigError(f"unknown task {t!r}; known: {', '.join(_TASKS)}")
        if cfg.L is not None and int(cfg.L) < 6:
            raise ConfigError("L too small")
        bad = set(cfg.healing) - _HEALING_KEYS
        if bad:
            raise ConfigError(f"unknown healing keys: {sorted(bad)}")
        bad = set(cfg.tolerances) - set(_DEFAULT_TOL)
        if bad:
            raise ConfigError(f"unknown tolerance keys: {sorted(bad)}")
        if cfg.state not in ("delta", "flat"):
            raise ConfigError(f"unknown state {cfg.state!r}")
        return cfg

    def symbol(self):
        if self.preset is not None:
            return load_preset(self.preset)
        return from_model_dict(self.model)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, _DEFAULT_TOL[name]))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if isinstance(d.get("healing", {}).get("E0"), complex):
            E0 = d["healing"]["E0"]
            d["healing"]["E0"] = [E0.real, E0.imag]
        return d


def _pair(name, prediction, fit, tol):
    ok = abs(fit - prediction) <= tol
    return {"name": name, "prediction": float(prediction), "fit": float(fit),
            "tol": float(tol), "pass": bool(ok)}


# ---------------------------------------------------------------------------
# Task implementations.  Each returns a list of prediction/fit pairs.

def _task_spectra(cfg, sym, outdir):
    from .lattice import assemble, spectrum, write_gbz_csv, write_spectrum_csv

    L = cfg.L or 140
    spec = spectrum(assemble(sym, L, "obc"))
    write_spectrum_csv(os.path.join(outdir, "spectrum.csv"), spec)
    if len(spec.gbz_points):
        write_gbz_csv(os.path.join(outdir, "gbz.csv"), spec)
    with open(os.path.join(outdir, "point_O.json"), "w") as fh:
        json.dump({"re": spec.point_O.real, "im": spec.point_O.imag}, fh, indent=2)
    return []


def _task_saddles(cfg, sym, outdir):
    from .saddle import find_saddles, find_saddles_multiband, write_saddles_csv

    if isinstance(sym, MultibandSymbol):
        saddles = find_saddles_multiband(sym, 0.0, "branch")
    else:
        saddles = find_saddles(sym, 0.0)
    write_saddles_csv(os.path.join(outdir, "saddles.csv"), saddles)
    return []


def _task_thimbles(cfg, sym, outdir):
    from .thimble import classify, write_classification_json, write_thimbles_csv

    if isinstance(sym, MultibandSymbol):
        raise ConfigError("thimble classification is single-band only")
    cls = classify(sym, 0.0, "bz")
    write_thimbles_csv(os.path.join(outdir, "thimbles.csv"), cls)
    write_classification_json(os.path.join(outdir, "classification.json"), cls)
    return []


def _evolved(cfg, sym, L):
    from .dynamics import default_times, delta_state, evolve, flat_state
    from .lattice import assemble, spectrum

    H = assemble(sym, L, "obc")
    spec = spectrum(H)
    if cfg.state == "delta":
        psi0 = delta_state(L, cfg.x0)
    else:
        psi0 = flat_state(L, cfg.state_width)
    trace = evolve(H, psi0, default_times(sym, L, spans=cfg.spans))
    return H, spec, trace


def _task_evolve(cfg, sym, outdir):
    from .dynamics import (fit_exponents, multiband_exponents, write_heatmap_csv,
                           write_trace_csv)
    from .thimble import classify

    if isinstance(sym, MultibandSymbol):
        return _task_multiband(cfg, sym, outdir)
    L = cfg.L or 140
    _, spec, trace = _evolved(cfg, sym, L)
    cls = classify(sym, 0.0, "bz")
    rep = fit_exponents(trace, spec, cls, sym, L)
    write_trace_csv(os.path.join(outdir, "trace.csv"), trace)
    write_heatmap_csv(os.path.join(outdir, "heatmap.csv"), trace)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(rep.as_dict(), fh, indent=2)
        fh.write("\n")
    return [
        _pair("lambda_vs_saddle", rep.lambda_pred,
              rep.lambda_fit.slope_corrected, cfg.tol("lambda_vs_saddle")),
        _pair("mu_vs_O", rep.mu_pred, rep.mu_fit.slope, cfg.tol("mu_vs_O")),
        _pair("lambda_tot_vs_pred", rep.lambda_tot_pred,
              rep.lambda_tot_fit.slope_corrected, cfg.tol("lambda_tot_vs_pred")),
        _pair("mu_tot_vs_O", rep.mu_pred, rep.mu_tot_fit.slope,
              cfg.tol("mu_tot_vs_O")),
    ]


def _task_lambda_v(cfg, sym, outdir):
    from .dynamics import find_P, lambda_of_v, write_lambda_v_csv

    if isinstance(sym, MultibandSymbol):
        raise ConfigError("lambda_v is single-band only")
    records, v_peak, lam_peak = lambda_of_v(sym)
    write_lambda_v_csv(os.path.join(outdir, "lambda_v.csv"), records)
    with open(os.path.join(outdir, "peak.json"), "w") as fh:
        json.dump({"v_peak": v_peak, "lambda_peak": lam_peak}, fh, indent=2)
    found = find_P(sym)
    pairs = []
    if found is not None and lam_peak <= found[1].imag + 1e-9 and v_peak > 1e-3:
        # travelling-peak case: the peak sits at the admissible Im maximum
        pairs.append(_pair("v_peak_vs_vP", found[2], v_peak, cfg.tol("v_peak_vs_vP")))
    return pairs


def _task_crossover(cfg, sym, outdir):
    from .dynamics import crossover_time, velocities

    if isinstance(sym, MultibandSymbol):
        raise ConfigError("crossover is single-band only")
    L = cfg.L or 51
    _, spec, trace = _evolved(cfg, sym, L)
    tc, tc_num = crossover_time(sym, L, trace, spec)
    vp, vm, vc = velocities(sym)
    with open(os.path.join(outdir, "crossover.json"), "w") as fh:
        json.dump({"t_c_theo": tc, "t_c_num": tc_num, "v_plus": vp,
                   "v_minus": vm, "v_c": vc}, fh, indent=2)
        fh.write("\n")
    if tc_num is None:
        return [{"name": "t_c_ratio", "prediction": 1.0, "fit": None,
                 "tol": cfg.tol("t_c_ratio"), "pass": False}]
    return [_pair("t_c_ratio", 1.0, tc_num / tc, cfg.tol("t_c_ratio"))]


def _task_healing(cfg, sym, outdir):
    from .healing import (flip_point, run_healing, scan, threshold_lambda_tot,
                          write_healing_csv, write_healing_report_json)

    if isinstance(sym, MultibandSymbol):
        raise ConfigError("healing is single-band only")
    h = dict(cfg.healing)
    L = int(h.pop("L", cfg.L or 600))
    pairs = []
    if "im_values" in h:
        re_E0 = float(h.pop("re_E0"))
        ims = np.asarray(h.pop("im_values"), float)
        h.pop("E0", None)
        reports = scan(sym, re_E0, ims, L=L, **h)
        flip = flip_point(reports)
        threshold = reports[0].threshold
        with open(os.path.join(outdir, "scan.json"), "w") as fh:
            json.dump({"threshold": threshold, "flip": flip,
                       "verdicts": [r.as_dict() for r in reports]}, fh, indent=2)
            fh.write("\n")
        if flip is not None:
            step = float(np.min(np.diff(ims)))
            pairs.append(_pair("verdict_vs_threshold", threshold, flip, step))
    else:
        E0 = h.pop("E0", None)
        if E0 is None:
            E0 = _HEALING_E0.get(cfg.preset)
        if E0 is None:
            raise ConfigError("healing needs an E0 (or a preset with a default)")
        if isinstance(E0, (list, tuple)):
            E0 = complex(E0[0], E0[1])
        rep = run_healing(sym, E0, L=L, **h)
        write_healing_csv(os.path.join(outdir, "healing.csv"), rep)
        write_healing_report_json(os.path.join(outdir, "healing_report.json"), rep)
        should_heal = E0.imag > rep.threshold
        pairs.append(_pair("verdict_vs_threshold", float(should_heal),
                           float(rep.verdict == "heals"),
                           cfg.tol("verdict_vs_threshold")))
    return pairs


def _task_multiband(cfg, sym, outdir):
    from .dynamics import multiband_exponents, write_trace_csv
    from .saddle import write_saddles_csv

    if not isinstance(sym, MultibandSymbol):
        raise ConfigError("multiband task needs a matrix symbol")
    L = cfg.L or 50
    res = multiband_exponents(sym, L, spans=max(cfg.spans, 12.0))
    write_saddles_csv(os.path.join(outdir, "branch_saddles.csv"),
                      res["branch_saddles"])
    write_saddles_csv(os.path.join(outdir, "det_saddles.csv"), res["det_saddles"])
    write_trace_csv(os.path.join(outdir, "trace.csv"), res["trace"])
    lam, mu = res["lambda_fit"], res["mu_fit"]
    with open(os.path.join(outdir, "multiband_report.json"), "w") as fh:
        json.dump({
            "L": L,
            "lambda_pred": res["lambda_pred"],
            "mu_pred": res["mu_pred"],
            "lambda_fit": lam.slope_corrected,
            "mu_fit": mu.slope,
            "branch_im_S": [s.S.imag for s in res["branch_saddles"]],
            "det_im_S": [s.S.imag for s in res["det_saddles"]],
        }, fh, indent=2)
        fh.write("\n")
    return [
        _pair("lambda_vs_branch_saddle", res["lambda_pred"],
              lam.slope_corrected, cfg.tol("lambda_vs_branch_saddle")),
        _pair("mu_vs_O_multiband", res["mu_pred"], mu.slope,
              cfg.tol("mu_vs_O_multiband")),
    ]


_RUNNERS = {
    "spectra": _task_spectra,
    "saddles": _task_saddles,
    "thimbles": _task_thimbles,
    "evolve": _task_evolve,
    "lambda_v": _task_lambda_v,
    "crossover": _task_crossover,
    "healing": _task_healing,
    "multiband": _task_multiband,
}


def run(cfg: ExperimentConfig, check: bool = False) -> int:
    """Execute every configured task; returns the process exit status."""
    if not cfg.tasks:
        return 0
    sym = cfg.symbol()
    os.makedirs(cfg.out, exist_ok=True)
    all_pairs = []
    for task in cfg.tasks:
        outdir = os.path.join(cfg.out, task)
        os.makedirs(outdir, exist_ok=True)
        try:
            all_pairs.extend(_RUNNERS[task](cfg, sym, outdir))
        except Exception as exc:
            print(f"error: task {task!r} "
                  f"({type(exc).__module__.rsplit('.', 1)[-1]}.{type(exc).__name__}): {exc}",
                  file=sys.stderr)
            _write_manifest(cfg, all_pairs, check, failed=task)
            return 1
    ok = all(p["pass"] for p in all_pairs)
    _write_manifest(cfg, all_pairs, check)
    for p in all_pairs:
        print(f"{'PASS' if p['pass'] else 'FAIL'} {p['name']}: "
              f"prediction={p['prediction']:.6g} fit={p['fit'] if p['fit'] is None else round(p['fit'], 6)} "
              f"tol={p['tol']:.3g}")
    return 0 if (ok or not check) else 1


def _write_manifest(cfg, pairs, check, failed=None):
    import numba
    import scipy

    cfg_dict = cfg.as_dict()
    blob = json.dumps(cfg_dict, sort_keys=True).encode()
    manifest = {
        "config": cfg_dict,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "nonbloch": __version__,
        },
        "pairs": pairs,
        "check": bool(check),
        "ok": failed is None and all(p["pass"] for p in pairs),
    }
    if failed is not None:
        manifest["failed_task"] = failed
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _apply_threads(n: int | None):
    if n is None:
        env = os.environ.get("NONBLOCH_THREADS")
        n = int(env) if env else None
    if n is not None:
        import numba

        numba.set_num_threads(max(1, n))
    return n


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nonbloch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute analysis tasks")
    p_run.add_argument("--preset", help="named parameter set (figure captions)")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--task", action="append", choices=_TASKS,
                       help="task to run (repeatable)")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--L", type=int)
    p_run.add_argument("--check", action="store_true",
                       help="exit nonzero when any prediction/fit pair misses tolerance")
    p_run.add_argument("--threads", type=int)

    p_plot = sub.add_parser("plot", help="render module CSVs as SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("--kind", required=True,
                        choices=("trace", "spectra", "lambda_v", "heatmap", "healing"))
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--report", help="report.json with fit windows (trace only)")

    args = parser.parse_args(argv)

    if args.command == "plot":
        from .svg import PLOTTERS, SvgError

        try:
            if args.kind == "trace":
                report = None
                if args.report:
                    with open(args.report) as fh:
                        report = json.load(fh)
                PLOTTERS["trace"](args.csv, args.out, report)
            else:
                PLOTTERS[args.kind](args.csv, args.out)
        except (SvgError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    _apply_threads(args.threads)
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: config: {exc}", file=sys.stderr)
            return 1
    if args.preset:
        data["preset"] = args.preset
    if args.task:
        data["tasks"] = list(data.get("tasks", [])) + args.task
    if args.out:
        data["out"] = args.out
    if args.L:
        data["L"] = args.L
    try:
        cfg = ExperimentConfig.from_dict(data)
    except (ConfigError, TypeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    return run(cfg, check=args.check)


if __name__ == "__main__":
    sys.exit(main())
