"""Fixed-step flow integration with first-order state sensitivities.

The filter needs the closed-loop flow phi(tau, x) under the switched law and
its Jacobian Phi(tau, x) = d phi / d x on a fixed node grid.  Phi solves the
variational equation Phi' = F(phi) Phi from the identity, where F is the
closed-loop Jacobian.  State and sensitivity are advanced jointly through the
same RK4 stages, which makes the discrete Phi the exact derivative of the
discrete flow map; finite differences through re-integration on the same grid
then agree to FD truncation error, kinks in the C^1 controllers included.

Fixed-step RK4 keeps every run reproducible bit for bit; adaptive stepping
would make set membership depend on solver heuristics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import SystemModel

__all__ = [
    "IntegratorConfig",
    "FlowGrid",
    "DivergedFlowError",
    "integrate_switched_flow",
    "flow_group_check",
    "rollout_extremes",
]


class DivergedFlowError(RuntimeError):
    """A flow left the trust region; carries the first offending node."""

    def __init__(self, node: int, t: float, magnitude: float):
        self.node = node
        self.t = t
        self.magnitude = magnitude
        super().__init__(
            f"flow diverged at node {node} (t={t:.6g}): |state| reached {magnitude:.3e}"
        )


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-grid RK4 settings: horizon T, node count N (N+1 grid points)."""

    horizon: float
    steps: int
    divergence_limit: float = 1e9

    def __post_init__(self) -> None:
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if self.divergence_limit <= 0.0:
            raise ValueError("divergence_limit must be positive")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps


@dataclass(frozen=True)
class FlowGrid:
    """Flow nodes tau_i = i T / N with states and optional sensitivities.

    states has shape (N+1, n) for a single seed state or (N+1, B, n) for a
    batch; sens appends (n, n) to the state shape.
    """

    taus: np.ndarray
    states: np.ndarray
    sens: Optional[np.ndarray]

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def terminal_sens(self) -> np.ndarray:
        if self.sens is None:
            raise ValueError("flow was integrated without sensitivities")
        return self.sens[-1]


def _closed_loop_terms(sys: SystemModel, controller, theta):
    def rhs(x):
        u = controller.value(x, theta)
        return sys.f(x) + np.einsum("...nm,...m->...n", sys.g(x), u)

    def rhs_and_jac(x):
        u = controller.value(x, theta)
        gx = sys.g(x)
        dot = sys.f(x) + np.einsum("...nm,...m->...n", gx, u)
        jac = (sys.df_dx(x)
               + np.einsum("...k,...kij->...ij", u, sys.dg_dx(x))
               + gx @ controller.dx(x, theta))
        return dot, jac

    return rhs, rhs_and_jac


def _check_node(x: np.ndarray, limit: float, node: int, t: float) -> None:
    mag = np.max(np.abs(x))
    if not np.isfinite(mag) or mag > limit:
        raise DivergedFlowError(node, t, float(mag))


def integrate_switched_flow(
    sys: SystemModel,
    controller,
    x0: np.ndarray,
    theta: Optional[np.ndarray],
    cfg: IntegratorConfig,
    with_sensitivity: bool = True,
) -> FlowGrid:
    """Integrate the closed loop under ``controller`` from x0 over the grid.

    ``controller`` is anything exposing value(x, theta) and dx(x, theta):
    a plain ControlLaw or a SwitchedController.
    """
    x = np.array(x0, dtype=np.float64)
    if x.shape[-1] != sys.n:
        raise ValueError(f"x0 has dimension {x.shape[-1]}, system expects {sys.n}")
    rhs, rhs_and_jac = _closed_loop_terms(sys, controller, theta)
    n_nodes = cfg.steps + 1
    dt = cfg.dt
    taus = np.linspace(0.0, cfg.horizon, n_nodes)
    states = np.zeros((n_nodes,) + x.shape)
    states[0] = x
    sens = None
    phi = None
    if with_sensitivity:
        sens = np.zeros((n_nodes,) + x.shape + (sys.n,))
        phi = np.broadcast_to(np.eye(sys.n), x.shape + (sys.n,)).copy()
        sens[0] = phi
    _check_node(x, cfg.divergence_limit, 0, 0.0)

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(cfg.steps):
            if with_sensitivity:
                k1, f1 = rhs_and_jac(x)
                p1 = f1 @ phi
                x2 = x + 0.5 * dt * k1
                k2, f2 = rhs_and_jac(x2)
                p2 = f2 @ (phi + 0.5 * dt * p1)
                x3 = x + 0.5 * dt * k2
                k3, f3 = rhs_and_jac(x3)
                p3 = f3 @ (phi + 0.5 * dt * p2)
                x4 = x + dt * k3
                k4, f4 = rhs_and_jac(x4)
                p4 = f4 @ (phi + dt * p3)
                phi = phi + (dt / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
            else:
                k1 = rhs(x)
                k2 = rhs(x + 0.5 * dt * k1)
                k3 = rhs(x + 0.5 * dt * k2)
                k4 = rhs(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _check_node(x, cfg.divergence_limit, i + 1, float(taus[i + 1]))
            states[i + 1] = x
            if with_sensitivity:
                sens[i + 1] = phi

    return FlowGrid(taus=taus, states=states, sens=sens)


def flow_group_check(
    sys: SystemModel,
    controller,
    x0: np.ndarray,
    theta: Optional[np.ndarray],
    cfg: IntegratorConfig,
    split_time: float,
) -> float:
    """Largest deviation of the two-leg composed flow from the one-shot flow.

    The split must land on a grid node; composing across misaligned grids
    would compare different discretizations and is rejected.
    """
    if split_time < 0.0 or split_time > cfg.horizon:
        raise ValueError(f"split_time {split_time} outside [0, {cfg.horizon}]")
    ratio = split_time / cfg.dt
    k = int(round(ratio))
    if abs(ratio - k) > 1e-9:
        raise ValueError(
            f"split_time {split_time} is not aligned with the grid (dt={cfg.dt})"
        )
    full = integrate_switched_flow(sys, controller, x0, theta, cfg)
    if k == 0 or k == cfg.steps:
        return 0.0
    leg1_cfg = IntegratorConfig(horizon=split_time, steps=k,
                                divergence_limit=cfg.divergence_limit)
    leg2_cfg = IntegratorConfig(horizon=cfg.horizon - split_time, steps=cfg.steps - k,
                                divergence_limit=cfg.divergence_limit)
    leg1 = integrate_switched_flow(sys, controller, x0, theta, leg1_cfg)
    leg2 = integrate_switched_flow(sys, controller, leg1.terminal_state, theta, leg2_cfg)
    dev = np.max(np.abs(full.terminal_state - leg2.terminal_state))
    composed = leg2.terminal_sens @ leg1.terminal_sens
    dev = max(dev, float(np.max(np.abs(full.terminal_sens - composed))))
    return float(dev)


def rollout_extremes(
    sys: SystemModel,
    controller,
    x0s: np.ndarray,
    theta: Optional[np.ndarray],
    cfg: IntegratorConfig,
    node_field: Callable[[np.ndarray], np.ndarray],
):
    """Batched state-only rollout returning per-cell running minima.

    Tracks min_i field(phi(tau_i)) over all N+1 nodes plus the terminal
    states.  Cells that diverge are parked and reported with -inf minima and
    ok=False instead of raising, so one bad cell cannot abort a whole scan.
    A consistency test pins this path to integrate_switched_flow node by node.
    """
    x = np.atleast_2d(np.array(x0s, dtype=np.float64))
    if x.shape[-1] != sys.n:
        raise ValueError(f"cells have dimension {x.shape[-1]}, system expects {sys.n}")
    rhs, _ = _closed_loop_terms(sys, controller, theta)
    dt = cfg.dt
    ok = np.all(np.isfinite(x), axis=-1) & (np.max(np.abs(x), axis=-1) <= cfg.divergence_limit)
    x[~ok] = 0.0
    running = np.where(ok, np.asarray(node_field(x), dtype=np.float64), -np.inf)

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.steps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * dt * k1)
            k3 = rhs(x + 0.5 * dt * k2)
            k4 = rhs(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = ~np.all(np.isfinite(x), axis=-1)
            bad |= np.max(np.where(np.isfinite(x), np.abs(x), np.inf), axis=-1) > cfg.divergence_limit
            newly = bad & ok
            if np.any(newly):
                ok = ok & ~newly
                x[~ok] = 0.0
                running[~ok] = -np.inf
            vals = np.asarray(node_field(x), dtype=np.float64)
            running = np.where(ok, np.minimum(running, vals), -np.inf)

    return running, x, ok
