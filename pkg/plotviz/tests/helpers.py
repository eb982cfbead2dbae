"""Synthetic CSV writers matching the documented artifact schemas."""

from __future__ import annotations

import csv

import numpy as np

GRID_HEADER = ["x1", "x2", "h_b", "traj_margin", "term_margin", "inside", "kernel"]


def fmt(value) -> str:
    return format(float(value), ".17g")


def write_grid(path, radius, n1=11, n2=11, window=((-1.0, 1.0), (-1.0, 1.0)),
               backup_radius=0.15, kernel_radius=0.95, drop_columns=(),
               mangle=None):
    """Concentric-disk grid: margin = radius - |x|^2, so nesting is by radius.

    mangle, when given, edits the row list in place before writing (used to
    probe the reader's ordering and shape checks).
    """
    axis1 = np.linspace(*window[0], n1)
    axis2 = np.linspace(*window[1], n2)
    header = [c for c in GRID_HEADER if c not in drop_columns]
    rows = []
    for x1 in axis1:
        for x2 in axis2:
            r2 = x1 * x1 + x2 * x2
            margin = radius - r2
            record = {
                "x1": fmt(x1), "x2": fmt(x2),
                "h_b": fmt(backup_radius - r2),
                "traj_margin": fmt(margin),
                "term_margin": fmt(margin + 0.01),
                "inside": str(int(margin >= 0.0)),
                "kernel": str(int(r2 <= kernel_radius)),
            }
            rows.append([record[c] for c in header])
    if mangle is not None:
        mangle(rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_run(path, steps=40, n=6, m=2, theta_p=0, drop_columns=(), seed=0):
    """A smooth synthetic closed-loop log with the trajectory schema."""
    rng = np.random.default_rng(seed)
    t = np.arange(steps + 1) * 0.02
    phase = rng.uniform(0.0, np.pi)
    header = ["t"] + [f"x{i + 1}" for i in range(n)] \
        + [f"u{j + 1}" for j in range(m)] + [f"u_nom_{j + 1}" for j in range(m)] \
        + ["status", "h", "h_b", "traj_margin", "term_margin"] \
        + [f"theta_{k + 1}" for k in range(theta_p)] + ["iters"]
    header = [c for c in header if c not in drop_columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, tk in enumerate(t):
            record = {"t": fmt(tk), "status": "optimal",
                      "h": fmt(0.5 + 0.1 * np.sin(tk + phase)),
                      "h_b": fmt(-0.2 + 0.05 * k),
                      "traj_margin": fmt(0.3), "term_margin": fmt(0.2),
                      "iters": "3"}
            for i in range(n):
                record[f"x{i + 1}"] = fmt(np.cos(tk + phase + i))
            for j in range(m):
                record[f"u{j + 1}"] = fmt(np.sin(3.0 * tk + j))
                record[f"u_nom_{j + 1}"] = fmt(np.sin(3.0 * tk + j) + 0.1)
            for p in range(theta_p):
                record[f"theta_{p + 1}"] = fmt(1.0 + 0.01 * k + 0.1 * p)
            writer.writerow([record[c] for c in header])
    return path
