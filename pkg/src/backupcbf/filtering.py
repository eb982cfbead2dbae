"""Constraint assembly and the minimally invasive safety filter.

Along the switched flow phi(tau_i, x), each grid node contributes one linear
constraint on the current input u:

    grad h(phi_i) Phi_i (f(x) + g(x) u) >= -alpha(h(phi_i))

plus a terminal row built from the backup-set barrier h_b at tau_N.  The rows
pin the *derivative of the flow nodes* with respect to time through the
sensitivity Phi_i, which is what makes the implicit safe set forward
invariant without ever representing it explicitly.  The filter then solves

    min (u - u_nom)' W (u - u_nom)   s.t. rows, box

and falls back to the switched law whenever the state has left the implicit
set or the QP cannot be trusted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ControlLaw, InputBox, ScalarField, SystemModel
from .flows import DivergedFlowError, FlowGrid, IntegratorConfig, integrate_switched_flow
from .qp import QPSolution, solve_box_qp
from .switching import SwitchedController

__all__ = [
    "ClassKappa",
    "ConstraintRow",
    "FilterResult",
    "FilterProblem",
    "StepRecord",
    "assemble_constraints",
    "solve_filter_qp",
    "filter_step",
]

_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassKappa:
    """Linear class-kappa margin shaper alpha(h) = lam * h."""

    lam: float = 1.0

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise ValueError(f"class-kappa gain must be positive, got {self.lam}")

    def __call__(self, h):
        return self.lam * np.asarray(h, dtype=np.float64)


@dataclass(frozen=True)
class ConstraintRow:
    """One half-space a' u >= b tagged with its source node."""

    a: np.ndarray
    b: float
    kind: str   # "trajectory" or "terminal"
    node: int


@dataclass(frozen=True)
class FilterResult:
    """Filter output: the input to apply plus solve diagnostics.

    margins are the normalized row residuals a' u - b evaluated at the
    returned input, in assembly order (trajectory nodes then terminal).
    """

    u: np.ndarray
    status: str
    margins: np.ndarray
    iterations: int
    reason: Optional[str] = None


@dataclass(frozen=True)
class FilterProblem:
    """Everything the per-step filter needs, fixed over a run."""

    sys: SystemModel
    controller: SwitchedController
    safety: ScalarField
    barrier: ScalarField
    box: InputBox
    nominal: ControlLaw
    flow_cfg: IntegratorConfig
    weight: np.ndarray
    alpha: ClassKappa = ClassKappa(1.0)
    alpha_terminal: ClassKappa = ClassKappa(1.0)


@dataclass(frozen=True)
class StepRecord:
    """filter_step output: result plus set-membership margins and timing."""

    result: FilterResult
    traj_margin: float
    term_margin: float
    wall_time: float


def assemble_constraints(
    flow: FlowGrid,
    safety: ScalarField,
    barrier: ScalarField,
    sys: SystemModel,
    x: np.ndarray,
    alpha: ClassKappa,
    alpha_terminal: ClassKappa,
) -> list[ConstraintRow]:
    """Build the N+1 trajectory rows and the terminal row at the state x."""
    if flow.sens is None:
        raise ValueError("constraint assembly needs flow sensitivities")
    x = np.asarray(x, dtype=np.float64)
    if flow.states.ndim != 2:
        raise ValueError("constraint assembly expects an unbatched flow")
    if not np.array_equal(flow.states[0], x):
        raise ValueError("flow does not start at the query state")
    f0 = sys.f(x)
    g0 = sys.g(x)

    h_vals = np.asarray(safety.value(flow.states), dtype=np.float64)
    grads = np.asarray(safety.grad(flow.states), dtype=np.float64)
    w = np.einsum("ti,tij->tj", grads, flow.sens)
    a_rows = w @ g0
    b_rows = -alpha(h_vals) - w @ f0

    rows = [ConstraintRow(a=a_rows[i], b=float(b_rows[i]), kind="trajectory", node=i)
            for i in range(flow.states.shape[0])]

    x_t = flow.terminal_state
    w_t = np.asarray(barrier.grad(x_t), dtype=np.float64) @ flow.terminal_sens
    a_t = w_t @ g0
    b_t = -float(alpha_terminal(barrier.value(x_t))) - float(w_t @ f0)
    rows.append(ConstraintRow(a=a_t, b=b_t, kind="terminal", node=flow.states.shape[0] - 1))
    return rows


def solve_filter_qp(
    u_nom: np.ndarray,
    weight: np.ndarray,
    rows: list[ConstraintRow],
    box: InputBox,
    fallback: Optional[np.ndarray] = None,
) -> FilterResult:
    """Normalize the rows, run the active-set solve, report margins.

    Rows are scaled by 1 / (||a|| + 1e-12) so margins and solver tolerances
    share one scale; zero rows become vacuous or plainly infeasible.  When the
    solve does not reach optimality the fallback input (or the clamped
    nominal) is returned with status "fallback".
    """
    u_nom = np.asarray(u_nom, dtype=np.float64).ravel()
    a_mat = np.array([r.a for r in rows], dtype=np.float64).reshape(len(rows), -1)
    b_vec = np.array([r.b for r in rows], dtype=np.float64)
    scale = np.linalg.norm(a_mat, axis=1) + _NORM_FLOOR
    a_mat = a_mat / scale[:, None]
    b_vec = b_vec / scale

    sol: QPSolution = solve_box_qp(u_nom, weight, a_mat, b_vec, box.lo, box.hi)
    if sol.status == "optimal":
        u = sol.u
        status, reason = "optimal", None
    else:
        u = box.clip(fallback if fallback is not None else u_nom)
        status, reason = "fallback", sol.reason
    margins = a_mat @ u - b_vec
    return FilterResult(u=u, status=status, margins=margins,
                        iterations=sol.iterations, reason=reason)


def filter_step(problem: FilterProblem, x: np.ndarray,
                theta: Optional[np.ndarray] = None) -> StepRecord:
    """One control instant: flow, membership gate, rows, QP, fallback.

    The certificates only cover states inside the implicit set, so a state
    whose flow already dips below h = 0 or misses the backup set is handed
    straight to the switched law instead of the QP.
    """
    start = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    try:
        flow = integrate_switched_flow(problem.sys, problem.controller, x, theta,
                                       problem.flow_cfg)
    except DivergedFlowError as err:
        u = problem.box.clip(problem.controller.value(x, theta))
        result = FilterResult(u=u, status="fallback", margins=np.zeros(0),
                              iterations=0, reason=str(err))
        return StepRecord(result=result, traj_margin=-np.inf, term_margin=-np.inf,
                          wall_time=time.perf_counter() - start)

    traj_margin = float(np.min(problem.safety.value(flow.states)))
    term_margin = float(problem.barrier.value(flow.terminal_state))
    if traj_margin < 0.0 or term_margin < 0.0:
        u = problem.box.clip(problem.controller.value(x, theta))
        result = FilterResult(u=u, status="fallback", margins=np.zeros(0),
                              iterations=0, reason="state outside implicit set")
        return StepRecord(result=result, traj_margin=traj_margin,
                          term_margin=term_margin,
                          wall_time=time.perf_counter() - start)

    rows = assemble_constraints(flow, problem.safety, problem.barrier, problem.sys,
                                x, problem.alpha, problem.alpha_terminal)
    u_nom = problem.nominal.value(x, theta)
    fallback = problem.box.clip(problem.controller.value(x, theta))
    result = solve_filter_qp(u_nom, problem.weight, rows, problem.box,
                             fallback=fallback)
    return StepRecord(result=result, traj_margin=traj_margin,
                      term_margin=term_margin,
                      wall_time=time.perf_counter() - start)
