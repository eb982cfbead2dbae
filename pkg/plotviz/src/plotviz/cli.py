"""Command line entry: render one job file per invocation."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .io import SchemaError
from .jobs import JobError, load_job
from .render import render

__all__ = ["main"]


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotviz",
        description="Render figures from backupcbf CSV artifacts.")
    sub = parser.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render a JSON job file")
    plot.add_argument("job", help="path to the job file")
    plot.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub.add_parser("version", help="print the tool version")
    args = parser.parse_args(argv)

    if args.command == "version":
        from . import __version__
        print(__version__)
        return 0

    try:
        job = load_job(args.job)
        out = render(job)
    except JobError as err:
        print(f"job error: {err}", file=sys.stderr)
        return 2
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
