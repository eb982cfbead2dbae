"""Closed-loop simulation: sample-and-hold filtered control on a fixed grid.

The harness evaluates the safety filter once per control period, holds the
returned input constant, and advances the plant with RK4 sub-steps.  For the
adaptive variant the parameter vector integrates the filtered adaptation rate
over the same period.  Everything is fixed-step, so a scenario replays to the
same bits every run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .adaptive import adaptive_filter_step
from .benchmarks import di_bundle, quad_bundle
from .filtering import filter_step

__all__ = [
    "BUNDLE_BUILDERS",
    "BUNDLE_DIMS",
    "DEFAULT_DT",
    "PLANT_SUBSTEPS",
    "Scenario",
    "TrajectoryLog",
    "run_closed_loop",
]

BUNDLE_BUILDERS = {"double_integrator": di_bundle, "quadrotor": quad_bundle}
BUNDLE_DIMS = {"double_integrator": (2, 1), "quadrotor": (6, 2)}

# the benchmarks never state a control rate; these are the shipped defaults
DEFAULT_DT = {"double_integrator": 0.01, "quadrotor": 0.02}
PLANT_SUBSTEPS = 10
_DIVERGENCE_LIMIT = 1e9

_VARIANTS = ("bcbf", "gb", "agb")


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment, fully determined by its fields."""

    bundle_id: str
    variant: str
    x0: np.ndarray
    duration: float
    dt: float
    theta0: Optional[np.ndarray] = None    # agb only; None picks the bundle's
    gamma: Optional[float] = None          # agb only; None picks the bundle's
    rate_limit: Optional[float] = None
    seed: int = 0
    overrides: Mapping = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.bundle_id not in BUNDLE_BUILDERS:
            raise ValueError(f"unknown bundle {self.bundle_id!r}, pick from "
                             f"{sorted(BUNDLE_BUILDERS)}")
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, pick from "
                             f"{list(_VARIANTS)}")
        x0 = np.asarray(self.x0, dtype=np.float64)
        n = BUNDLE_DIMS[self.bundle_id][0]
        if x0.shape != (n,) or not np.all(np.isfinite(x0)):
            raise ValueError(f"x0 must be {n} finite values, got {self.x0}")
        object.__setattr__(self, "x0", x0)
        if self.theta0 is not None:
            if self.variant != "agb":
                raise ValueError("theta0 is only meaningful for the agb variant")
            object.__setattr__(self, "theta0",
                               np.asarray(self.theta0, dtype=np.float64))
        if not self.dt > 0.0:
            raise ValueError(f"control period dt must be positive, got {self.dt}")
        if not self.duration >= self.dt:
            raise ValueError(
                f"duration {self.duration} is shorter than one period {self.dt}")
        if abs(round(self.duration / self.dt) * self.dt - self.duration) > 1e-9:
            raise ValueError("duration must be an integer multiple of dt")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def build_bundle(self):
        return BUNDLE_BUILDERS[self.bundle_id](**dict(self.overrides))


@dataclass(frozen=True)
class TrajectoryLog:
    """Column-wise record of a run, one row per control instant.

    Rows carry the state at time t and the filter decision made there; theta
    is None for the non-adaptive variants.  An aborted run keeps the rows up
    to (and including) the last healthy instant.
    """

    t: np.ndarray
    states: np.ndarray
    u_applied: np.ndarray
    u_nominal: np.ndarray
    status: tuple
    h: np.ndarray
    h_b: np.ndarray
    traj_margin: np.ndarray
    term_margin: np.ndarray
    theta: Optional[np.ndarray]
    iters: np.ndarray
    solver_time: float
    completed: bool
    abort_reason: Optional[str] = None

    @property
    def rows(self) -> int:
        return self.t.size


def _advance_plant(sys, x, u, dt, substeps=PLANT_SUBSTEPS):
    """Hold u constant and integrate the plant with RK4 sub-steps."""

    def rhs(state):
        return sys.f(state) + sys.g(state) @ u

    h = dt / substeps
    for _ in range(substeps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def run_closed_loop(scenario: Scenario, bundle=None) -> TrajectoryLog:
    """Run one scenario; pass a pre-built bundle to skip re-validation."""
    if bundle is None:
        bundle = scenario.build_bundle()
    adaptive = scenario.variant == "agb"
    if adaptive:
        gamma = scenario.gamma
        if gamma is None:
            gamma = getattr(bundle, "gamma", None)
        if gamma is None:
            raise ValueError("adaptive scenario needs an adaptation gain "
                             "(set gamma on the scenario)")
        problem = bundle.adaptive_problem(gamma=gamma,
                                          rate_limit=scenario.rate_limit)
        base = problem.base
        theta = (bundle.theta0 if scenario.theta0 is None
                 else scenario.theta0.copy())
    else:
        problem = bundle.problem(scenario.variant)
        base = problem
        theta = None

    x = scenario.x0.copy()
    steps = scenario.steps
    t_col, states, u_col, unom_col = [], [], [], []
    status, h_col, hb_col, traj_col, term_col = [], [], [], [], []
    theta_col, iters = [], []
    solver_time = 0.0
    completed, reason = True, None

    for k in range(steps + 1):
        if adaptive:
            rec = adaptive_filter_step(problem, x, theta)
            u = rec.u
        else:
            rec = filter_step(problem, x)
            u = rec.result.u
        t_col.append(k * scenario.dt)
        states.append(x)
        u_col.append(u)
        unom_col.append(np.asarray(base.nominal.value(x, None),
                                   dtype=np.float64).ravel())
        status.append(rec.result.status)
        h_col.append(float(base.safety.value(x)))
        hb_col.append(float(base.barrier.value(x)))
        traj_col.append(rec.traj_margin)
        term_col.append(rec.term_margin)
        iters.append(rec.result.iterations)
        solver_time += rec.wall_time
        if adaptive:
            theta_col.append(theta.copy())
        if k == steps:
            break
        x_next = _advance_plant(base.sys, x, u, scenario.dt)
        if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > _DIVERGENCE_LIMIT:
            completed = False
            reason = (f"plant diverged during step {k} "
                      f"(t={k * scenario.dt:.6g})")
            break
        x = x_next
        if adaptive:
            theta = theta + scenario.dt * rec.theta_rate

    return TrajectoryLog(
        t=np.asarray(t_col),
        states=np.asarray(states),
        u_applied=np.asarray(u_col),
        u_nominal=np.asarray(unom_col),
        status=tuple(status),
        h=np.asarray(h_col),
        h_b=np.asarray(hb_col),
        traj_margin=np.asarray(traj_col),
        term_margin=np.asarray(term_col),
        theta=np.asarray(theta_col) if adaptive else None,
        iters=np.asarray(iters, dtype=np.int64),
        solver_time=solver_time,
        completed=completed,
        abort_reason=reason,
    )
