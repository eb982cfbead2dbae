"""Figure assembly for the two job kinds.

phase_sets: one axes showing the backup region, the three implicit regions
(one per expansion variant) as zero-level contours of their margin fields,
and the viability-kernel boundary, with optional trajectory overlays.

quad_panels: a seven-panel run summary, one trajectory panel per variant plus
shared panels for the safety value, the backup-set level, the two inputs, and
the adapted gain traces.

This is a batch tool; the Agg backend is forced so rendering never needs a
display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Patch

from .io import GridTable, SchemaError, TrajectoryTable, load_grid, load_trajectory
from .jobs import KIND_INPUTS, PlotJob

__all__ = ["phase_sets_figure", "quad_panels_figure", "render"]

# one color per run variant, shared across every panel
VARIANT_STYLE = {
    "bcbf": ("standard", "tab:purple"),
    "gb": ("generalized", "tab:red"),
    "agb": ("adaptive", "tab:blue"),
}
REGION_STYLE = [
    # key, label, fill color, draw order is outermost first
    ("gb-timeopt", "time-optimal expansion", "#c6dbef"),
    ("gb-linear", "aggressive-linear expansion", "#9ecae1"),
    ("bcbf", "backup-law expansion", "#fdd0a2"),
]


def _region_fill(ax, x1, x2, f, color, label):
    """Shade {f >= 0} and draw its zero-level boundary."""
    X, Y = np.meshgrid(x1, x2, indexing="ij")
    if np.any(f >= 0.0):
        top = max(float(f.max()), 1.0)
        ax.contourf(X, Y, f, levels=[0.0, top], colors=[color], alpha=0.8)
    ax.contour(X, Y, f, levels=[0.0], colors=[color], linewidths=1.2)
    return Patch(facecolor=color, alpha=0.8, label=label)


def phase_sets_figure(grids: dict, flows=(), title=None, xlim=None, ylim=None):
    base = grids["bcbf"]
    for key, grid in grids.items():
        if not (np.array_equal(grid.x1, base.x1) and np.array_equal(grid.x2, base.x2)):
            raise SchemaError(f"grid axes of input '{key}' differ from 'bcbf'")
        if not np.array_equal(grid.h_b, base.h_b):
            raise SchemaError(f"h_b column of input '{key}' differs from 'bcbf'; "
                              "the grids come from different scans")

    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    handles = []
    for key, label, color in REGION_STYLE:
        handles.append(_region_fill(ax, base.x1, base.x2,
                                    grids[key].margin, color, label))
    handles.append(_region_fill(ax, base.x1, base.x2, base.h_b,
                                "#a1d99b", "backup set"))

    X, Y = np.meshgrid(base.x1, base.x2, indexing="ij")
    kernel = base.kernel.astype(float)
    ax.contour(X, Y, kernel, levels=[0.5], colors="black",
               linestyles="dashed", linewidths=1.4)
    handles.append(plt.Line2D([], [], color="black", linestyle="dashed",
                              label="viability kernel boundary"))

    for flow in flows:
        ax.plot(flow.states[:, 0], flow.states[:, 1], color="0.25", lw=0.9)
        ax.plot(flow.states[0, 0], flow.states[0, 1], marker="o", ms=4,
                color="0.25")
    if flows:
        handles.append(plt.Line2D([], [], color="0.25", lw=0.9,
                                  label="closed-loop runs"))

    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if xlim:
        ax.set_xlim(*xlim)
    if ylim:
        ax.set_ylim(*ylim)
    if title:
        ax.set_title(title)
    ax.legend(handles=handles, loc="upper right", fontsize=8, framealpha=0.9)
    fig.tight_layout()
    return fig


def quad_panels_figure(runs: dict, title=None, xlim=None, ylim=None):
    fig = plt.figure(figsize=(12.0, 9.0))
    grid = fig.add_gridspec(3, 6, hspace=0.45, wspace=0.9)
    order = ("bcbf", "gb", "agb")

    for k, key in enumerate(order):
        ax = fig.add_subplot(grid[0, 2 * k:2 * k + 2])
        name, color = VARIANT_STYLE[key]
        run = runs[key]
        ax.plot(run.states[:, 0], run.states[:, 1], color=color, lw=1.4)
        ax.plot(run.states[0, 0], run.states[0, 1], "o", ms=5, color=color)
        ax.plot(run.states[-1, 0], run.states[-1, 1], "*", ms=9, color=color)
        ax.set_title(f"({chr(ord('a') + k)}) {name} trajectory", fontsize=10)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        if xlim:
            ax.set_xlim(*xlim)
        if ylim:
            ax.set_ylim(*ylim)

    ax_h = fig.add_subplot(grid[1, 0:3])
    ax_hb = fig.add_subplot(grid[1, 3:6])
    for key in order:
        name, color = VARIANT_STYLE[key]
        run = runs[key]
        ax_h.plot(run.t, run.h, color=color, lw=1.2, label=name)
        ax_hb.plot(run.t, run.h_b, color=color, lw=1.2, label=name)
    ax_h.axhline(0.0, color="black", lw=0.8)
    ax_h.set_title("(d) safety value", fontsize=10)
    ax_h.set_xlabel("t")
    ax_h.legend(fontsize=8)
    ax_hb.axhline(0.0, color="black", lw=0.8)
    ax_hb.set_title("(e) backup-set level", fontsize=10)
    ax_hb.set_xlabel("t")

    ax_u = fig.add_subplot(grid[2, 0:3])
    for key in order:
        name, color = VARIANT_STYLE[key]
        run = runs[key]
        ax_u.plot(run.t, run.inputs[:, 0], color=color, lw=1.2, label=f"{name} u1")
        if run.inputs.shape[1] > 1:
            ax_u.plot(run.t, run.inputs[:, 1], color=color, lw=1.0,
                      linestyle="dashed", label=f"{name} u2")
    ax_u.set_title("(f) applied inputs", fontsize=10)
    ax_u.set_xlabel("t")
    ax_u.legend(fontsize=7, ncols=3)

    ax_g = fig.add_subplot(grid[2, 3:6])
    theta = runs["agb"].theta
    for j in range(theta.shape[1]):
        ax_g.plot(runs["agb"].t, theta[:, j], lw=1.2, label=f"theta_{j + 1}")
    ax_g.set_title("(g) adapted gains", fontsize=10)
    ax_g.set_xlabel("t")
    ax_g.legend(fontsize=7, ncols=2)

    if title:
        fig.suptitle(title)
    return fig


def render(job: PlotJob) -> Path:
    """Materialize a job to its output image; returns the written path."""
    if job.kind == "phase_sets":
        grids = {key: load_grid(path) for key, path in job.inputs.items()}
        flows = [load_trajectory(p) for p in job.trajectories]
        fig = phase_sets_figure(grids, flows, title=job.title,
                                xlim=job.xlim, ylim=job.ylim)
    elif job.kind == "quad_panels":
        runs = {key: load_trajectory(path) for key, path in job.inputs.items()}
        if runs["agb"].theta is None:
            raise SchemaError(f"missing column 'theta_1' in {job.inputs['agb']}: "
                              "the gains panel needs an adaptive run")
        fig = quad_panels_figure(runs, title=job.title,
                                 xlim=job.xlim, ylim=job.ylim)
    else:  # load_job rejects this first; keep render safe standalone
        raise SchemaError(f"unknown plot kind {job.kind!r}, "
                          f"pick from {sorted(KIND_INPUTS)}")
    job.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.out, dpi=150)
    plt.close(fig)
    return job.out
