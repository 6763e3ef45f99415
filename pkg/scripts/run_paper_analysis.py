#!/usr/bin/env python3
"""Reproduce the full published analysis from the bundled data.

Writes everything under out/paper/: the bracketing report and summary, the
2008-2013 sensitivity window, pattern diagnostics with the relative-trends
table and plot, and the region placebo study.

Run from the repository root:  python scripts/run_paper_analysis.py
"""

import sys
from pathlib import Path

from didbracket.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = str(ROOT / "configs" / "paper.tomlish")


def run(argv):
    code = main(argv)
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    out = ROOT / "out" / "paper"
    run(["analyze", "--config", CONFIG, "--out-dir", str(out / "main")])
    run(["analyze", "--config", CONFIG, "--after", "2008-2013",
         "--out-dir", str(out / "after_2008_2013")])
    run(["diagnose", "--config", CONFIG, "--emit-plots",
         "--out-dir", str(out / "diagnostics")])
    run(["placebo", "--config", CONFIG, "--rank-unit", "Missouri", "--emit-plots",
         "--out-dir", str(out / "placebo")])
    print(f"\nreports written under {out}")
