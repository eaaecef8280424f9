#!/usr/bin/env python3
"""Self-healing verdicts and threshold scans for the two lossy presets.

For each preset, evolves the reference initial state through the
H -> H+V -> H schedule, then scans Im(E0) to locate where the healing
verdict flips; the flip should land on max[Im(S_d), Im(P)] within the
scan step.  Budget: a few minutes per preset.
"""

import sys

from nonbloch.cli import ExperimentConfig, main as cli_main, run

SCANS = {
    # (re_E0, first Im, last Im, step)
    "fig6a": (-1.0, -0.05, 0.05, 0.02),
    "fig6e": (-5.0 / 3.0, 0.07, 0.21, 0.02),
}


def go(out_root="results/healing"):
    status = 0
    for name, (re0, lo, hi, step) in SCANS.items():
        out = f"{out_root}/{name}"
        cfg = ExperimentConfig.from_dict({
            "preset": name,
            "tasks": ["healing"],
            "out": f"{out}/single",
        })
        status |= run(cfg, check=True)
        status |= cli_main(["plot", f"{out}/single/healing/healing.csv",
                            "--kind", "healing", "--out", f"{out}/epsilon.svg"])
        n = int(round((hi - lo) / step)) + 1
        cfg = ExperimentConfig.from_dict({
            "preset": name,
            "tasks": ["healing"],
            "out": f"{out}/scan",
            "healing": {"re_E0": re0,
                        "im_values": [lo + i * step for i in range(n)]},
        })
        status |= run(cfg, check=True)
    return status


if __name__ == "__main__":
    sys.exit(go(*sys.argv[1:]))
