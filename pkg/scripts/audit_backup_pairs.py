#!/usr/bin/env python3
"""Audit both shipped backup pairs and print the worst margins."""

import argparse
import sys
from pathlib import Path

from backupcbf.cli import main as cli

REPO = Path(__file__).resolve().parents[1]


def run(out_root: Path) -> int:
    worst = 0
    for config, name in [("validate_di.json", "di"), ("validate_quad.json", "quad")]:
        rc = cli(["validate-backup", str(REPO / "configs" / config),
                  "--out", str(out_root / name)])
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/audit", help="output root directory")
    sys.exit(run(Path(parser.parse_args().out)))
