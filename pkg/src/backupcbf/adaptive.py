"""Online expansion of the implicit safe set by adapting expander parameters.

The expander law carries p tunable parameters theta.  Treating theta as extra
state with dynamics theta-dot = u_theta turns parameter adaptation into an
input channel of an augmented control-affine system:

    d/dt [x; theta] = [f(x); 0] + [[g(x), 0], [0, I_p]] [u; u_theta]

Running the ordinary constraint assembly on this augmented system yields rows
whose trailing p columns price how parameter motion propagates through the
flow, so one QP picks the control and the adaptation rate together and the
safety rows bound both.  The nominal adaptation rate follows the gradient of
the terminal backup-barrier value with respect to theta, which the augmented
sensitivity delivers for free as the tail of the terminal row.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ControlLaw, InputBox, ScalarField, SystemModel
from .filtering import (
    ClassKappa,
    FilterProblem,
    FilterResult,
    assemble_constraints,
    solve_filter_qp,
)
from .flows import DivergedFlowError, FlowGrid, integrate_switched_flow
from .switching import SwitchedController

__all__ = [
    "AdaptiveFilterProblem",
    "AdaptiveStepRecord",
    "adaptation_direction",
    "adaptive_filter_step",
    "augment_field",
    "augment_law",
    "augment_system",
    "make_adaptive_problem",
]


def augment_system(sys: SystemModel, p: int) -> SystemModel:
    """Stack p integrator channels for the parameters under the state."""
    if p <= 0:
        raise ValueError(f"parameter count must be positive, got {p}")
    n, m = sys.n, sys.m

    def f_hat(xh):
        xh = np.asarray(xh, dtype=np.float64)
        out = np.zeros_like(xh)
        out[..., :n] = sys.f(xh[..., :n])
        return out

    def g_hat(xh):
        xh = np.asarray(xh, dtype=np.float64)
        out = np.zeros(xh.shape[:-1] + (n + p, m + p))
        out[..., :n, :m] = sys.g(xh[..., :n])
        out[..., n:, m:] = np.eye(p)
        return out

    def df_hat(xh):
        xh = np.asarray(xh, dtype=np.float64)
        out = np.zeros(xh.shape[:-1] + (n + p, n + p))
        out[..., :n, :n] = sys.df_dx(xh[..., :n])
        return out

    def dg_hat(xh):
        xh = np.asarray(xh, dtype=np.float64)
        out = np.zeros(xh.shape[:-1] + (m + p, n + p, n + p))
        out[..., :m, :n, :n] = sys.dg_dx(xh[..., :n])
        return out

    return SystemModel(n=n + p, m=m + p, f=f_hat, g=g_hat,
                       df_dx=df_hat, dg_dx=dg_hat)


def augment_law(law: ControlLaw, n: int, p: int) -> ControlLaw:
    """Lift a law to the augmented state, reading theta from the state tail.

    The output gains p trailing zero channels (the flow never adapts by
    itself), and the parameter Jacobian of a parameterized law moves into the
    state Jacobian columns for theta.
    """
    if law.dim_params not in (0, p):
        raise ValueError(
            f"law has {law.dim_params} parameters, expected 0 or {p}")
    reads_theta = law.dim_params == p

    def value(xh, theta=None):
        xh = np.asarray(xh, dtype=np.float64)
        x = xh[..., :n]
        th = xh[..., n:] if reads_theta else None
        u = np.asarray(law.value(x, th), dtype=np.float64)
        out = np.zeros(xh.shape[:-1] + (u.shape[-1] + p,))
        out[..., :u.shape[-1]] = u
        return out

    def dx(xh, theta=None):
        xh = np.asarray(xh, dtype=np.float64)
        x = xh[..., :n]
        th = xh[..., n:] if reads_theta else None
        jac_x = np.asarray(law.dx(x, th), dtype=np.float64)
        m = jac_x.shape[-2]
        out = np.zeros(xh.shape[:-1] + (m + p, n + p))
        out[..., :m, :n] = jac_x
        if reads_theta:
            out[..., :m, n:] = np.asarray(law.dtheta(x, th), dtype=np.float64)
        return out

    return ControlLaw(dim_params=0, value=value, dx=dx)


def augment_field(field: ScalarField, n: int) -> ScalarField:
    """Evaluate a state-space field on the x part of the augmented state."""
    def value(xh):
        xh = np.asarray(xh, dtype=np.float64)
        return field.value(xh[..., :n])

    def grad(xh):
        xh = np.asarray(xh, dtype=np.float64)
        out = np.zeros_like(xh)
        out[..., :n] = field.grad(xh[..., :n])
        return out

    return ScalarField(value=value, grad=grad)


@dataclass(frozen=True)
class AdaptiveFilterProblem:
    """An ordinary filter problem plus its augmented counterpart."""

    base: FilterProblem
    aug: FilterProblem
    p: int
    gamma: float


@dataclass(frozen=True)
class AdaptiveStepRecord:
    """Joint control and adaptation-rate pick for one instant."""

    result: FilterResult     # over the stacked input (u, u_theta)
    u: np.ndarray
    theta_rate: np.ndarray
    direction: np.ndarray    # d h_b(flow end) / d theta, before the gain
    traj_margin: float
    term_margin: float
    wall_time: float


def make_adaptive_problem(
    base: FilterProblem,
    gamma: float,
    rate_limit: Optional[float] = None,
    rate_weight: float = 1e-2,
) -> AdaptiveFilterProblem:
    """Augment every piece of ``base`` for joint control and adaptation.

    rate_limit bounds each parameter rate channel; it defaults to 5 * gamma
    so the box never truncates a unit-scale ascent direction.  rate_weight
    sets the QP cost block on the rate channels.
    """
    p = base.controller.dim_params
    if p == 0:
        raise ValueError("base controller has no adaptable parameters")
    if gamma < 0.0:
        raise ValueError(f"adaptation gain must be nonnegative, got {gamma}")
    if rate_limit is None:
        rate_limit = 5.0 * gamma
    if rate_limit <= 0.0:
        raise ValueError(f"rate limit must be positive, got {rate_limit}")
    if rate_weight <= 0.0:
        raise ValueError(f"rate weight must be positive, got {rate_weight}")

    n = base.sys.n
    aug_sys = augment_system(base.sys, p)
    aug_controller = SwitchedController(
        expander=augment_law(base.controller.expander, n, p),
        backup=augment_law(base.controller.backup, n, p),
        barrier=augment_field(base.controller.barrier, n),
        eps=base.controller.eps,
    )
    rate_box = InputBox(np.full(p, -rate_limit), np.full(p, rate_limit))
    weight = np.zeros((base.sys.m + p, base.sys.m + p))
    weight[:base.sys.m, :base.sys.m] = base.weight
    weight[base.sys.m:, base.sys.m:] = rate_weight * np.eye(p)
    aug = FilterProblem(
        sys=aug_sys,
        controller=aug_controller,
        safety=augment_field(base.safety, n),
        barrier=augment_field(base.barrier, n),
        box=InputBox.concat(base.box, rate_box),
        nominal=augment_law(base.nominal, n, p),
        flow_cfg=base.flow_cfg,
        weight=weight,
        alpha=base.alpha,
        alpha_terminal=base.alpha_terminal,
    )
    return AdaptiveFilterProblem(base=base, aug=aug, p=p, gamma=float(gamma))


def adaptation_direction(flow: FlowGrid, barrier: ScalarField, n: int) -> np.ndarray:
    """Gradient of the terminal barrier value with respect to the parameters.

    barrier must be the augmented field; the tail columns of the terminal
    sensitivity hold d(flow end)/d(theta) because theta enters as state.
    """
    w_t = np.asarray(barrier.grad(flow.terminal_state), dtype=np.float64)
    return (w_t @ flow.terminal_sens)[n:]


def adaptive_filter_step(
    problem: AdaptiveFilterProblem,
    x: np.ndarray,
    theta: np.ndarray,
) -> AdaptiveStepRecord:
    """One instant of joint filtering and safe parameter adaptation."""
    start = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (problem.p,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({problem.p},)")
    xh = np.concatenate([x, theta])
    n, m = problem.base.sys.n, problem.base.sys.m
    aug = problem.aug

    def fall_back(reason, traj, term):
        u_hat = aug.box.clip(aug.controller.value(xh, None))
        result = FilterResult(u=u_hat, status="fallback", margins=np.zeros(0),
                              iterations=0, reason=reason)
        return AdaptiveStepRecord(
            result=result, u=u_hat[:m], theta_rate=np.zeros(problem.p),
            direction=np.zeros(problem.p), traj_margin=traj, term_margin=term,
            wall_time=time.perf_counter() - start)

    try:
        flow = integrate_switched_flow(aug.sys, aug.controller, xh, None,
                                       aug.flow_cfg)
    except DivergedFlowError as err:
        return fall_back(str(err), -np.inf, -np.inf)

    traj_margin = float(np.min(aug.safety.value(flow.states)))
    term_margin = float(aug.barrier.value(flow.terminal_state))
    if traj_margin < 0.0 or term_margin < 0.0:
        return fall_back("state outside implicit set", traj_margin, term_margin)

    rows = assemble_constraints(flow, aug.safety, aug.barrier, aug.sys, xh,
                                aug.alpha, aug.alpha_terminal)
    direction = adaptation_direction(flow, aug.barrier, n)
    u_nom = np.concatenate([
        np.asarray(problem.base.nominal.value(x, None), dtype=np.float64).ravel(),
        problem.gamma * direction,
    ])
    fallback = aug.box.clip(aug.controller.value(xh, None))
    result = solve_filter_qp(u_nom, aug.weight, rows, aug.box, fallback=fallback)
    return AdaptiveStepRecord(
        result=result, u=result.u[:m], theta_rate=result.u[m:],
        direction=direction, traj_margin=traj_margin, term_margin=term_margin,
        wall_time=time.perf_counter() - start)
