"""Acceptance suite: one test per shipped guarantee.

Each test prints a single PASS/FAIL line carrying its measured numbers, so a
verbose run doubles as the acceptance report.  The expensive artifacts are
built once per session: three 201x201 membership scans for the region
geometry, and one command-line run of every shipped scenario (reused by the
safety, ordering, and determinism checks).  Everything goes through public
entry points the way a user would drive them.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np
import pytest

from backupcbf.adaptive import adaptation_direction
from backupcbf.benchmarks import di_bundle, quad_bundle, validate_backup_pair
from backupcbf.cli import main as cli_main
from backupcbf.filtering import assemble_constraints
from backupcbf.flows import FlowGrid, integrate_switched_flow
from backupcbf.qp import solve_box_qp
from backupcbf.sets import GridAxis, di_viability_oracle, grid_scan
from backupcbf.switching import SwitchedController

from oracles import dual_projected_gradient_qp
from test_qp import random_feasible_instance

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"

SCENARIO_CONFIGS = {
    "di-wall-bcbf": "di_wall_bcbf.json",
    "di-wall-gb": "di_wall_gb.json",
    "di-wall-agb": "di_wall_agb.json",
    "quad-landing-bcbf": "quad_landing_bcbf.json",
    "quad-landing-gb": "quad_landing_gb.json",
    "quad-landing-agb": "quad_landing_agb.json",
}

DI_WINDOW_LO = np.array([-1.2, -2.0])
DI_WINDOW_HI = np.array([1.2, 2.0])


def _report(tag: str, ok: bool, detail: str) -> str:
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    return line


def _subset(a: np.ndarray, b: np.ndarray) -> bool:
    return not np.any(a & ~b)


def _read_table(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    table = {}
    for j, name in enumerate(header):
        col = [r[j] for r in data]
        table[name] = np.array(col) if name == "status" else np.array(
            [float(v) for v in col])
    return table


@pytest.fixture(scope="session")
def di():
    return di_bundle()


@pytest.fixture(scope="session")
def quad():
    return quad_bundle()


@pytest.fixture(scope="session")
def region_scan(di):
    """Membership grids for all three variants plus the analytic references."""
    t0 = time.monotonic()
    axes = (GridAxis(index=0, lo=float(DI_WINDOW_LO[0]), hi=float(DI_WINDOW_HI[0]), count=201),
            GridAxis(index=1, lo=float(DI_WINDOW_LO[1]), hi=float(DI_WINDOW_HI[1]), count=201))
    mesh = np.stack(np.meshgrid(axes[0].values, axes[1].values, indexing="ij"), axis=-1)
    regions = {
        "backup": np.asarray(di.barrier.value(mesh)) >= 0.0,
        "kernel": np.asarray(di_viability_oracle(mesh, x_max=di.x_max)),
    }
    for variant, key in (("bcbf", "switched"), ("gb-linear", "linear"),
                         ("gb-timeopt", "timeopt")):
        regions[key] = grid_scan(di.problem(variant), axes, np.zeros(2)).inside
    return regions, time.monotonic() - t0


@pytest.fixture(scope="session")
def shipped_runs(tmp_path_factory):
    """First command-line run of every shipped scenario, with parsed logs."""
    root = tmp_path_factory.mktemp("shipped-runs")
    runs = {}
    for name, fname in SCENARIO_CONFIGS.items():
        dest = root / name
        t0 = time.monotonic()
        rc = cli_main(["simulate", str(CONFIGS / fname), "--out", str(dest), "--quiet"])
        wall = time.monotonic() - t0
        assert rc == 0, f"simulate exited {rc} for {name}"
        raw = (dest / "trajectory.csv").read_bytes()
        runs[name] = {"dir": dest, "bytes": raw, "wall": wall,
                      "table": _read_table(dest / "trajectory.csv")}
    return runs


def test_a1_region_nesting_and_growth(region_scan):
    regions, elapsed = region_scan
    count = {key: int(np.count_nonzero(val)) for key, val in regions.items()}
    clauses = [
        ("backup within switched", _subset(regions["backup"], regions["switched"])),
        ("switched within linear", _subset(regions["switched"], regions["linear"])),
        ("linear within kernel", _subset(regions["linear"], regions["kernel"])),
        ("switched within timeopt", _subset(regions["switched"], regions["timeopt"])),
        ("timeopt within kernel", _subset(regions["timeopt"], regions["kernel"])),
        ("count switched < linear", count["switched"] < count["linear"]),
        ("count linear < timeopt", count["linear"] < count["timeopt"]),
        ("scan within five minutes", elapsed <= 300.0),
    ]
    failed = [label for label, ok in clauses if not ok]
    detail = (f"cells backup={count['backup']} switched={count['switched']} "
              f"linear={count['linear']} timeopt={count['timeopt']} "
              f"kernel={count['kernel']}; scan {elapsed:.0f}s; "
              f"failed clauses: {failed if failed else 'none'}")
    line = _report("A1", not failed, detail)
    assert not failed, line


def _fd_relative_errors(bundle, variant, states, delta):
    """Terminal sensitivity against re-integrated central differences."""
    prob = bundle.problem(variant)
    ctrl = prob.controller
    n = states.shape[1]
    flow = integrate_switched_flow(bundle.sys, ctrl, states, None, prob.flow_cfg)
    phi = flow.terminal_sens
    eye = np.eye(n)
    plus = integrate_switched_flow(
        bundle.sys, ctrl, states[:, None, :] + delta * eye, None, prob.flow_cfg,
        with_sensitivity=False)
    minus = integrate_switched_flow(
        bundle.sys, ctrl, states[:, None, :] - delta * eye, None, prob.flow_cfg,
        with_sensitivity=False)
    # row s of the difference is the end-state shift for basis direction s
    fd = np.swapaxes((plus.terminal_state - minus.terminal_state) / (2.0 * delta), 1, 2)
    num = np.linalg.norm(fd - phi, axis=(1, 2))
    den = np.maximum(np.linalg.norm(phi, axis=(1, 2)), 1e-12)
    return num / den


def test_a2_terminal_sensitivity_matches_finite_differences(di, quad):
    rng = np.random.default_rng(11)
    rel_di = _fd_relative_errors(
        di, "gb", rng.uniform(DI_WINDOW_LO, DI_WINDOW_HI, size=(100, 2)), 1e-6)
    quad_lo = np.array([-1.5, 0.5, -1.0, -1.0, -0.3, -0.5])
    quad_hi = np.array([1.5, 4.5, 1.0, 1.0, 0.3, 0.5])
    rel_quad = _fd_relative_errors(
        quad, "gb", rng.uniform(quad_lo, quad_hi, size=(100, 6)), 1e-5)
    ok = bool(np.all(rel_di <= 1e-3) and np.all(rel_quad <= 1e-3))
    line = _report("A2", ok, f"worst relative error di={rel_di.max():.2e} "
                             f"quad={rel_quad.max():.2e} (tol 1e-3, 100 states each)")
    assert ok, line


def test_a3_filter_qp_matches_dual_ascent_oracle():
    rng = np.random.default_rng(314)
    worst_u = worst_obj = 0.0
    for _ in range(200):
        u_nom, weight, rows_a, rows_b, lo, hi = random_feasible_instance(rng)
        sol = solve_box_qp(u_nom, weight, rows_a, rows_b, lo, hi)
        assert sol.status == "optimal"
        assert np.all(sol.u >= lo) and np.all(sol.u <= hi)  # box exact
        ref = dual_projected_gradient_qp(u_nom, weight, rows_a, rows_b, lo, hi)
        worst_u = max(worst_u, float(np.max(np.abs(sol.u - ref), initial=0.0)))
        d_sol, d_ref = sol.u - u_nom, ref - u_nom
        worst_obj = max(worst_obj, abs(float(d_sol @ weight @ d_sol)
                                       - float(d_ref @ weight @ d_ref)))
    ok = worst_u < 1e-6 and worst_obj < 1e-9
    line = _report("A3", ok, f"200 QPs, worst solution gap {worst_u:.2e} "
                             f"(tol 1e-6), worst objective gap {worst_obj:.2e} (tol 1e-9)")
    assert ok, line


def test_a4_identical_laws_recover_plain_backup_rows(di):
    # switched machinery with the expander pinned to the backup law, against
    # the plain pipeline that integrates the backup law directly
    prob = di.problem("bcbf")
    pinned = SwitchedController(expander=di.backup, backup=di.backup,
                                barrier=di.barrier, eps=di.eps)
    rng = np.random.default_rng(7)
    states = rng.uniform(DI_WINDOW_LO, DI_WINDOW_HI, size=(100, 2))
    band = 0
    mismatched = 0
    for x in states:
        flow_sw = integrate_switched_flow(di.sys, pinned, x, None, prob.flow_cfg)
        flow_plain = integrate_switched_flow(di.sys, di.backup, x, None, prob.flow_cfg)
        eta = pinned.eta(flow_sw.states)
        band += bool(np.any((eta > 0.0) & (eta < 1.0)))
        rows_sw = assemble_constraints(flow_sw, di.safety, di.barrier, di.sys, x,
                                       prob.alpha, prob.alpha_terminal)
        rows_plain = assemble_constraints(flow_plain, di.safety, di.barrier, di.sys, x,
                                          prob.alpha, prob.alpha_terminal)
        for r_sw, r_plain in zip(rows_sw, rows_plain):
            if not (np.array_equal(r_sw.a, r_plain.a) and r_sw.b == r_plain.b):
                mismatched += 1
    ok = mismatched == 0 and band > 0
    line = _report("A4", ok, f"100 states ({band} crossing the blend band), "
                             f"{mismatched} rows differ bitwise")
    assert ok, line


def test_a5_shipped_scenarios_stay_safe_and_in_box(shipped_runs, di, quad):
    worst_h = np.inf
    quad_walls = []
    box_violations = []
    for name, run in shipped_runs.items():
        table = run["table"]
        bundle = quad if name.startswith("quad") else di
        worst_h = min(worst_h, float(table["h"].min()))
        for j in range(bundle.box.lo.size):
            u = table[f"u{j + 1}"]
            if np.any(u < bundle.box.lo[j]) or np.any(u > bundle.box.hi[j]):
                box_violations.append(f"{name}:u{j + 1}")
        if name.startswith("quad"):
            quad_walls.append(run["wall"])
    ok = worst_h >= -1e-3 and not box_violations and max(quad_walls) <= 120.0
    line = _report("A5", ok, f"6 scenarios, min logged h {worst_h:+.4f} "
                             f"(floor -1e-3), box violations "
                             f"{box_violations if box_violations else 'none'}, "
                             f"slowest quadrotor run {max(quad_walls):.0f}s (cap 120s)")
    assert ok, line


def test_a6_parameter_step_raises_terminal_barrier(di):
    ap = di.adaptive_problem(gamma=25.0)
    n = di.sys.n
    rng = np.random.default_rng(23)
    xs = rng.uniform(DI_WINDOW_LO, DI_WINDOW_HI, size=(80, 2))
    thetas = di.theta0 * rng.uniform(0.4, 1.8, size=(80,) + di.theta0.shape)
    aug = np.concatenate([xs, thetas], axis=1)
    flow = integrate_switched_flow(ap.aug.sys, ap.aug.controller, aug, None,
                                   ap.aug.flow_cfg)
    dirs = np.stack([
        adaptation_direction(
            FlowGrid(taus=flow.taus, states=flow.states[:, b], sens=flow.sens[:, b]),
            ap.aug.barrier, n)
        for b in range(aug.shape[0])])
    norms = np.linalg.norm(dirs, axis=1)
    keep = np.flatnonzero(norms > 1e-6)[:50]
    assert keep.size == 50, f"only {keep.size} sampled states had a usable direction"
    before = np.asarray(di.barrier.value(flow.terminal_state[keep, :n]))
    stepped = aug[keep].copy()
    stepped[:, n:] += 1e-4 * dirs[keep] / norms[keep, None]
    flow2 = integrate_switched_flow(ap.aug.sys, ap.aug.controller, stepped, None,
                                    ap.aug.flow_cfg, with_sensitivity=False)
    after = np.asarray(di.barrier.value(flow2.terminal_state[:, :n]))
    gain = after - before
    ok = bool(np.all(gain > 0.0))
    line = _report("A6", ok, f"50 augmented states, terminal barrier gain "
                             f"min {gain.min():.2e} median {np.median(gain):.2e}, "
                             f"non-increasing {int(np.sum(gain <= 0.0))}")
    assert ok, line


def test_a7_adaptive_expansion_reaches_further(shipped_runs, quad):
    dist = {}
    for variant in ("bcbf", "gb", "agb"):
        table = shipped_runs[f"quad-landing-{variant}"]["table"]
        final = np.array([table["x1"][-1], table["x2"][-1]])
        dist[variant] = float(np.linalg.norm(final - quad.goal))
    agb = shipped_runs["quad-landing-agb"]["table"]
    z_gain_growth = [float(agb[f"theta_{j}"][-1] - agb[f"theta_{j}"][0])
                     for j in (3, 4)]
    ok = (dist["agb"] < dist["gb"] < dist["bcbf"]
          and all(g > 0.0 for g in z_gain_growth))
    line = _report("A7", ok, f"final goal distance adaptive={dist['agb']:.3f} "
                             f"< generalized={dist['gb']:.3f} "
                             f"< standard={dist['bcbf']:.3f}; adaptive z-gain "
                             f"growth {z_gain_growth[0]:+.2f}/{z_gain_growth[1]:+.2f}")
    assert ok, line


def test_a8_backup_pair_audit(di, quad):
    reports = {"di": validate_backup_pair(di, samples=400),
               "quad": validate_backup_pair(quad, samples=400)}
    inflated = {"di": validate_backup_pair(di, samples=400, rho_scale=100.0),
                "quad": validate_backup_pair(quad, samples=400, rho_scale=9.0)}
    boundary = {k: r.boundary_derivative_min for k, r in reports.items()}
    ok = (all(r.passed for r in reports.values())
          and all(v >= -1e-8 for v in boundary.values())
          and not any(r.passed for r in inflated.values()))
    line = _report("A8", ok, f"shipped pairs pass "
                             f"(boundary derivative di={boundary['di']:.2e} "
                             f"quad={boundary['quad']:.2e}, floor -1e-8); "
                             f"inflated level sets rejected: "
                             f"{[k for k, r in inflated.items() if not r.passed]}")
    assert ok, line


def test_a9_trajectory_csv_is_deterministic(shipped_runs, tmp_path_factory):
    root = tmp_path_factory.mktemp("repeat-runs")
    differing = []
    total = 0
    for name, fname in SCENARIO_CONFIGS.items():
        dest = root / name
        rc = cli_main(["simulate", str(CONFIGS / fname), "--out", str(dest), "--quiet"])
        assert rc == 0, f"repeat simulate exited {rc} for {name}"
        raw = (dest / "trajectory.csv").read_bytes()
        total += len(raw)
        if raw != shipped_runs[name]["bytes"]:
            differing.append(name)
    ok = not differing
    line = _report("A9", ok, f"6 scenarios re-run, byte-identical logs "
                             f"({total} bytes compared), differing: "
                             f"{differing if differing else 'none'}")
    assert ok, line
