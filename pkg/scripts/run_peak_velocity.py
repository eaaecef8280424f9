#!/usr/bin/env python3
"""Travelling vs edge-pinned wave peaks.

fig2a: the profile peak detaches and moves right at v_peak = v_P, so the
norm grows at Im(P).  fig4e: the peak stays pinned at the edge (v_peak=0)
and the norm follows the dominant saddle Im(S_d).  Emits lambda(v) curves
and profile heatmaps for both.
"""

import sys

from nonbloch.cli import ExperimentConfig, main as cli_main, run


def go(out_root="results/peaks"):
    status = 0
    for name in ("fig2a", "fig4e"):
        out = f"{out_root}/{name}"
        cfg = ExperimentConfig.from_dict({
            "preset": name,
            "tasks": ["evolve", "lambda_v"],
            "L": 140,
            "out": out,
        })
        status |= run(cfg, check=True)
        status |= cli_main(["plot", f"{out}/lambda_v/lambda_v.csv",
                            "--kind", "lambda_v", "--out", f"{out}/lambda_v.svg"])
        status |= cli_main(["plot", f"{out}/evolve/heatmap.csv",
                            "--kind", "heatmap", "--out", f"{out}/heatmap.svg"])
    return status


if __name__ == "__main__":
    sys.exit(go(*sys.argv[1:]))
