"""CSV and metadata emission for trajectories and grid scans.

Floats are serialized with 17 significant digits so a round-trip through the
file reproduces the exact double; wall-clock numbers never go into the CSVs
(they live in meta.json), which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .sets import GridScan
from .sim import TrajectoryLog

__all__ = [
    "trajectory_columns",
    "grid_columns",
    "write_trajectory_csv",
    "write_grid_csv",
    "write_meta",
]


def _fmt(value) -> str:
    return format(float(value), ".17g")


def trajectory_columns(n: int, m: int, p: int = 0) -> list:
    cols = ["t"]
    cols += [f"x{i + 1}" for i in range(n)]
    cols += [f"u{j + 1}" for j in range(m)]
    cols += [f"u_nom_{j + 1}" for j in range(m)]
    cols += ["status", "h", "h_b", "traj_margin", "term_margin"]
    cols += [f"theta_{j + 1}" for j in range(p)]
    cols += ["iters"]
    return cols


def write_trajectory_csv(path, log: TrajectoryLog) -> Path:
    path = Path(path)
    n = log.states.shape[1]
    m = log.u_applied.shape[1]
    p = 0 if log.theta is None else log.theta.shape[1]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_columns(n, m, p))
        for k in range(log.rows):
            row = [_fmt(log.t[k])]
            row += [_fmt(v) for v in log.states[k]]
            row += [_fmt(v) for v in log.u_applied[k]]
            row += [_fmt(v) for v in log.u_nominal[k]]
            row.append(log.status[k])
            row += [_fmt(log.h[k]), _fmt(log.h_b[k]),
                    _fmt(log.traj_margin[k]), _fmt(log.term_margin[k])]
            if p:
                row += [_fmt(v) for v in log.theta[k]]
            row.append(str(int(log.iters[k])))
            writer.writerow(row)
    return path


def grid_columns() -> list:
    return ["x1", "x2", "h_b", "traj_margin", "term_margin", "inside", "kernel"]


def write_grid_csv(path, scan: GridScan, kernel: np.ndarray, h_b: np.ndarray) -> Path:
    """One row per cell in index order (row-major over the two axes).

    h_b carries the backup-set level at each cell so downstream plots can draw
    that region's boundary without recomputing anything.
    """
    path = Path(path)
    if len(scan.axes) != 2:
        raise ValueError("grid CSV needs a two-axis scan")
    kernel = np.asarray(kernel, dtype=bool)
    if kernel.shape != scan.traj_margin.shape:
        raise ValueError(
            f"kernel shape {kernel.shape} does not match the scan grid "
            f"{scan.traj_margin.shape}")
    h_b = np.asarray(h_b, dtype=np.float64)
    if h_b.shape != scan.traj_margin.shape:
        raise ValueError(
            f"h_b shape {h_b.shape} does not match the scan grid "
            f"{scan.traj_margin.shape}")
    values0 = scan.axes[0].values
    values1 = scan.axes[1].values
    inside = scan.inside
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(grid_columns())
        for i in range(values0.size):
            for j in range(values1.size):
                writer.writerow([
                    _fmt(values0[i]), _fmt(values1[j]), _fmt(h_b[i, j]),
                    _fmt(scan.traj_margin[i, j]), _fmt(scan.term_margin[i, j]),
                    str(int(inside[i, j])), str(int(kernel[i, j])),
                ])
    return path


def write_meta(path, payload: dict) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__} into meta.json")
