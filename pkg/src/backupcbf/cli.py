"""Command-line surface: simulate, scan-set, validate-backup, version.

Exit codes: 0 success, 2 config/validation failure (nothing written), 3
runtime abort (divergence; partial artifacts are written).  The default
output directory is --out, then the config's "out", then $BACKUPCBF_OUT,
then the working directory.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import validate_backup_pair
from .config import (
    ConfigError,
    load_config,
    scan_job_from_config,
    scenario_from_config,
    validate_job_from_config,
)
from .csvio import write_grid_csv, write_meta, write_trajectory_csv
from .sets import GridAxis, di_viability_oracle, grid_scan
from .sim import run_closed_loop

__all__ = ["main"]

_OUT_ENV = "BACKUPCBF_OUT"
_SCAN_VARIANTS = ("bcbf", "gb-linear", "gb-timeopt")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backupcbf",
        description="Safety filtering with backup control barrier functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_job(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON job description")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--quiet", action="store_true", help="no progress output")
        return p

    add_job("simulate", "run one closed-loop scenario, write trajectory.csv")
    add_job("scan-set", "grid-scan the implicit sets, write grid CSVs")
    add_job("validate-backup", "audit the configured backup pair")
    sub.add_parser("version", help="print the tool version")
    return parser


def _resolve_out(args, cfg: dict) -> Path:
    out = args.out or cfg.get("out") or os.environ.get(_OUT_ENV) or "."
    return Path(out)


def _apply_cli_seed(args, cfg: dict) -> dict:
    if args.seed is not None:
        cfg = dict(cfg)
        cfg["seed"] = args.seed
    return cfg


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _meta_common(cfg: dict, runtime: float) -> dict:
    return {"config": cfg, "version": __version__, "runtime_seconds": runtime}


def _run_simulate(args) -> int:
    cfg = _apply_cli_seed(args, load_config(args.config))
    scenario = scenario_from_config(cfg)
    bundle = scenario.build_bundle()
    out = _resolve_out(args, cfg)

    start = time.perf_counter()
    log = run_closed_loop(scenario, bundle=bundle)
    runtime = time.perf_counter() - start

    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_trajectory_csv(out / "trajectory.csv", log)
    meta = _meta_common(cfg, runtime)
    meta.update({
        "rows": log.rows,
        "completed": log.completed,
        "abort_reason": log.abort_reason,
        "solver_seconds": log.solver_time,
        "min_h": float(np.min(log.h)),
        "min_h_b": float(np.min(log.h_b)),
        "statuses": sorted(set(log.status)),
        "artifacts": ["trajectory.csv"],
    })
    write_meta(out / "meta.json", meta)
    _say(args, f"wrote {csv_path} ({log.rows} rows, "
               f"min h {np.min(log.h):.3e})")
    if not log.completed:
        _say(args, f"aborted: {log.abort_reason}")
        return 3
    return 0


def _run_scan_set(args) -> int:
    cfg = _apply_cli_seed(args, load_config(args.config))
    job = scan_job_from_config(cfg)
    bundle = job.build_bundle()
    out = _resolve_out(args, cfg)

    (x1_lo, x1_hi), (x2_lo, x2_hi) = job.window
    axes = [GridAxis(0, x1_lo, x1_hi, job.resolution[0]),
            GridAxis(1, x2_lo, x2_hi, job.resolution[1])]
    grid1, grid2 = np.meshgrid(axes[0].values, axes[1].values, indexing="ij")
    states = np.stack([grid1, grid2], axis=-1)
    kernel = di_viability_oracle(states, x_max=bundle.x_max)
    h_b = np.asarray(bundle.barrier.value(states), dtype=np.float64)

    start = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    artifacts, counts = [], {}
    for variant in _SCAN_VARIANTS:
        scan = grid_scan(bundle.problem(variant), axes, np.zeros(2))
        name = f"grid_{variant}.csv"
        write_grid_csv(out / name, scan, kernel, h_b)
        artifacts.append(name)
        counts[variant] = int(scan.inside_count)
        _say(args, f"wrote {out / name} ({counts[variant]} inside cells)")
    runtime = time.perf_counter() - start

    meta = _meta_common(cfg, runtime)
    meta.update({
        "inside_counts": counts,
        "kernel_count": int(np.count_nonzero(kernel)),
        "artifacts": artifacts,
    })
    write_meta(out / "meta.json", meta)
    return 0


def _run_validate_backup(args) -> int:
    cfg = _apply_cli_seed(args, load_config(args.config))
    job = validate_job_from_config(cfg)
    start = time.perf_counter()
    bundle = job.build_bundle()   # shipped constants re-audit themselves here
    report = validate_backup_pair(bundle, samples=job.samples, seed=job.seed,
                                  rho_scale=job.rho_scale)
    runtime = time.perf_counter() - start

    out = _resolve_out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta_common(cfg, runtime)
    meta.update({
        "report": {
            "passed": report.passed,
            "boundary_derivative_min": report.boundary_derivative_min,
            "saturation_headroom_min": report.saturation_headroom_min,
            "safety_margin_min": report.safety_margin_min,
            "samples": report.samples,
            "failures": list(report.failures),
        },
        "artifacts": [],
    })
    write_meta(out / "meta.json", meta)
    verdict = "passed" if report.passed else "FAILED"
    _say(args, f"backup pair {verdict} "
               f"(derivative {report.boundary_derivative_min:.3e}, "
               f"headroom {report.saturation_headroom_min:.3e}, "
               f"safety {report.safety_margin_min:.3e})")
    if not report.passed:
        for failure in report.failures:
            _say(args, f"  {failure}")
        return 2
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    handlers = {
        "simulate": _run_simulate,
        "scan-set": _run_scan_set,
        "validate-backup": _run_validate_backup,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:   # bundle construction / validation failures
        print(f"validation error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
