"""End-to-end: real artifacts from the backupcbf command line tool render.

The primary package is exercised purely through its installed CLI and the CSV
files it writes; nothing here imports it.
"""

from __future__ import annotations

import json
import subprocess

import numpy as np
import pytest

from plotviz.cli import main
from plotviz.io import load_grid


def primary(args) -> None:
    proc = subprocess.run(["backupcbf", *args], capture_output=True, text=True)
    assert proc.returncode == 0, f"backupcbf {args} failed:\n{proc.stderr}{proc.stdout}"


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("artifacts")
    scan_cfg = root / "scan.json"
    scan_cfg.write_text(json.dumps({
        "bundle": "double_integrator", "resolution": [41, 41],
        "out": str(root / "scan")}))
    primary(["scan-set", str(scan_cfg), "--quiet"])

    for variant in ("bcbf", "gb", "agb"):
        sim_cfg = root / f"quad_{variant}.json"
        sim_cfg.write_text(json.dumps({
            "bundle": "quadrotor", "variant": variant,
            "x0": [-1.0, 3.0, 0.0, 0.0, 0.0, 0.0],
            "duration": 0.6, "dt": 0.02,
            "out": str(root / f"quad_{variant}")}))
        primary(["simulate", str(sim_cfg), "--quiet"])

    di_cfg = root / "di.json"
    di_cfg.write_text(json.dumps({
        "bundle": "double_integrator", "variant": "gb",
        "x0": [-0.5, 0.0], "duration": 0.5, "dt": 0.01,
        "out": str(root / "di_run")}))
    primary(["simulate", str(di_cfg), "--quiet"])
    return root


def test_scan_regions_are_nonempty_and_nested(artifacts):
    grids = {key: load_grid(artifacts / "scan" / f"grid_{key}.csv")
             for key in ("bcbf", "gb-linear", "gb-timeopt")}
    backup = grids["bcbf"].h_b >= 0.0
    chain = [("backup", backup),
             ("bcbf", grids["bcbf"].inside),
             ("gb-linear", grids["gb-linear"].inside),
             ("kernel", grids["bcbf"].kernel)]
    for name, region in chain + [("gb-timeopt", grids["gb-timeopt"].inside)]:
        assert np.any(region), f"region {name} is empty"
    for (inner_name, inner), (outer_name, outer) in zip(chain, chain[1:]):
        stray = int(np.count_nonzero(inner & ~outer))
        assert stray == 0, f"{stray} cells of {inner_name} escape {outer_name}"
    assert not np.any(grids["gb-timeopt"].inside & ~grids["bcbf"].kernel)


def test_phase_sets_renders_from_scan_output(artifacts, tmp_path):
    job = tmp_path / "sets.json"
    job.write_text(json.dumps({
        "kind": "phase_sets",
        "inputs": {key: str(artifacts / "scan" / f"grid_{key}.csv")
                   for key in ("bcbf", "gb-linear", "gb-timeopt")},
        "trajectories": [str(artifacts / "di_run" / "trajectory.csv")],
        "out": "sets.png",
        "title": "double integrator safe sets",
    }))
    assert main(["plot", str(job), "--quiet"]) == 0
    assert (tmp_path / "sets.png").stat().st_size > 0


def test_quad_panels_render_from_run_output(artifacts, tmp_path):
    job = tmp_path / "panels.json"
    job.write_text(json.dumps({
        "kind": "quad_panels",
        "inputs": {v: str(artifacts / f"quad_{v}" / "trajectory.csv")
                   for v in ("bcbf", "gb", "agb")},
        "out": "panels.png",
    }))
    assert main(["plot", str(job), "--quiet"]) == 0
    assert (tmp_path / "panels.png").stat().st_size > 0
