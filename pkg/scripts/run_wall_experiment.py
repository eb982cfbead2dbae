#!/usr/bin/env python3
"""Run the wall benchmark: three filtered scenarios plus the set-expansion scan.

Artifacts land under runs/di/<name>/; pass --out to move the root.
"""

import argparse
import sys
from pathlib import Path

from backupcbf.cli import main as cli

REPO = Path(__file__).resolve().parents[1]
JOBS = [
    ("simulate", "di_wall_bcbf.json", "bcbf"),
    ("simulate", "di_wall_gb.json", "gb"),
    ("simulate", "di_wall_agb.json", "agb"),
    ("scan-set", "di_scan.json", "scan"),
]


def run(out_root: Path) -> int:
    worst = 0
    for command, config, name in JOBS:
        rc = cli([command, str(REPO / "configs" / config),
                  "--out", str(out_root / name)])
        print(f"[{name}] exit {rc}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/di", help="output root directory")
    sys.exit(run(Path(parser.parse_args().out)))
