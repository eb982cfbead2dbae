#!/usr/bin/env python3
"""Run the quadrotor landing benchmark under all three filter variants.

Each run takes on the order of a minute; artifacts land under runs/quad/.
"""

import argparse
import sys
from pathlib import Path

from backupcbf.cli import main as cli

REPO = Path(__file__).resolve().parents[1]
JOBS = [
    ("quad_landing_bcbf.json", "bcbf"),
    ("quad_landing_gb.json", "gb"),
    ("quad_landing_agb.json", "agb"),
]


def run(out_root: Path) -> int:
    worst = 0
    for config, name in JOBS:
        rc = cli(["simulate", str(REPO / "configs" / config),
                  "--out", str(out_root / name)])
        print(f"[{name}] exit {rc}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/quad", help="output root directory")
    sys.exit(run(Path(parser.parse_args().out)))
