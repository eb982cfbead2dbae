"""Double-integrator benchmark: wall avoidance with a saturated linear backup.

Plant: x1'' = u with |u| <= 1, safe while |x1| <= x_max.  The backup law
sat(-K x) stabilizes the origin and keeps the quadratic backup set invariant;
two expanders are shipped, a high-gain saturated linear law and a smoothed
time-optimal law, plus a parameterized copy of the linear one whose gain row
doubles as the adaptation parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..adaptive import AdaptiveFilterProblem, make_adaptive_problem
from ..dynamics import ControlLaw, InputBox, ScalarField, SystemModel, linear_system, solve_lyapunov
from ..filtering import ClassKappa, FilterProblem
from ..flows import IntegratorConfig
from ..smoothing import smooth_sat, smooth_sat_grad
from ..switching import SwitchedController

__all__ = ["DoubleIntegratorBundle", "di_bundle"]

_A = np.array([[0.0, 1.0], [0.0, 0.0]])
_B = np.array([[0.0], [1.0]])


def _saturated_gain_law(k_row: np.ndarray, delta: float) -> ControlLaw:
    """u = sat(-k x), identity core half-width 1 - delta."""
    k_row = np.asarray(k_row, dtype=np.float64)

    def value(x, theta=None):
        z = -np.einsum("j,...j->...", k_row, np.asarray(x, float))
        return np.asarray(smooth_sat(z, -1.0, 1.0, delta))[..., None]

    def dx(x, theta=None):
        z = -np.einsum("j,...j->...", k_row, np.asarray(x, float))
        slope = np.asarray(smooth_sat_grad(z, -1.0, 1.0, delta))
        return slope[..., None, None] * (-k_row)

    return ControlLaw(dim_params=0, value=value, dx=dx)


def _adaptive_gain_law(delta: float) -> ControlLaw:
    """u = sat(-theta . x) with the gain row as adaptation parameters."""

    def value(x, theta):
        z = -np.einsum("...j,...j->...", np.asarray(theta, float), np.asarray(x, float))
        return np.asarray(smooth_sat(z, -1.0, 1.0, delta))[..., None]

    def dx(x, theta):
        theta = np.asarray(theta, float)
        x = np.asarray(x, float)
        z = -np.einsum("...j,...j->...", theta, x)
        slope = np.asarray(smooth_sat_grad(z, -1.0, 1.0, delta))
        return slope[..., None, None] * -np.broadcast_to(theta, x.shape)[..., None, :]

    def dtheta(x, theta):
        x = np.asarray(x, float)
        z = -np.einsum("...j,...j->...", np.asarray(theta, float), x)
        slope = np.asarray(smooth_sat_grad(z, -1.0, 1.0, delta))
        return slope[..., None, None] * -x[..., None, :]

    return ControlLaw(dim_params=2, value=value, dx=dx, dtheta=dtheta)


def _time_optimal_law(beta: float, delta: float) -> ControlLaw:
    """Smoothed minimum-time regulator u = -sat((x2^2 sat(x2/b) + 2 x1)/b).

    For small beta this is bang-bang around the parabolic switching curve
    x1 = -x2 |x2| / 2; both saturations share the [-1, 1] range.
    """

    def raw(x):
        x = np.asarray(x, float)
        inner = np.asarray(smooth_sat(x[..., 1] / beta, -1.0, 1.0, delta))
        return (x[..., 1] ** 2 * inner + 2.0 * x[..., 0]) / beta, inner

    def value(x, theta=None):
        w, _ = raw(x)
        return -np.asarray(smooth_sat(w, -1.0, 1.0, delta))[..., None]

    def dx(x, theta=None):
        x = np.asarray(x, float)
        w, inner = raw(x)
        outer_slope = np.asarray(smooth_sat_grad(w, -1.0, 1.0, delta))
        inner_slope = np.asarray(smooth_sat_grad(x[..., 1] / beta, -1.0, 1.0, delta))
        dw = np.zeros(x.shape[:-1] + (1, 2))
        dw[..., 0, 0] = 2.0 / beta
        dw[..., 0, 1] = (2.0 * x[..., 1] * inner
                         + x[..., 1] ** 2 * inner_slope / beta) / beta
        return -outer_slope[..., None, None] * dw

    return ControlLaw(dim_params=0, value=value, dx=dx)


def _constant_law(level: float, m: int) -> ControlLaw:
    def value(x, theta=None):
        x = np.asarray(x, float)
        return np.broadcast_to(np.full(m, level), x.shape[:-1] + (m,))

    def dx(x, theta=None):
        x = np.asarray(x, float)
        return np.zeros(x.shape[:-1] + (m, x.shape[-1]))

    return ControlLaw(dim_params=0, value=value, dx=dx)


def _wall_field(x_max: float) -> ScalarField:
    def value(x):
        x = np.asarray(x, float)
        return x_max ** 2 - x[..., 0] ** 2

    def grad(x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        out[..., 0] = -2.0 * x[..., 0]
        return out

    return ScalarField(value=value, grad=grad)


def _ellipse_field(p_mat: np.ndarray, rho: float) -> ScalarField:
    def value(x):
        x = np.asarray(x, float)
        return rho - np.einsum("...i,ij,...j->...", x, p_mat, x)

    def grad(x):
        x = np.asarray(x, float)
        return -2.0 * np.einsum("ij,...j->...i", p_mat, x)

    return ScalarField(value=value, grad=grad)


@dataclass(frozen=True)
class DoubleIntegratorBundle:
    """Everything needed to filter, scan, and simulate the wall benchmark."""

    x_max: float
    K: np.ndarray
    K_e: np.ndarray
    rho: float
    Q: np.ndarray
    beta: float
    eps: float
    horizon: float
    steps: int
    P: np.ndarray
    sat_delta_backup: float
    sat_delta: float
    lam: float
    lam_terminal: float
    u_push: float
    sys: SystemModel = field(repr=False)
    box: InputBox = field(repr=False)
    safety: ScalarField = field(repr=False)
    barrier: ScalarField = field(repr=False)
    backup: ControlLaw = field(repr=False)
    expander_linear: ControlLaw = field(repr=False)
    expander_timeopt: ControlLaw = field(repr=False)
    expander_adaptive: ControlLaw = field(repr=False)
    nominal: ControlLaw = field(repr=False)
    weight: np.ndarray = field(repr=False)

    # shared by the generic backup-pair validator
    @property
    def barrier_center(self) -> np.ndarray:
        return np.zeros(2)

    @property
    def theta0(self) -> np.ndarray:
        """Initial adaptation parameters: the linear expander gain row."""
        return self.K_e.copy()

    @property
    def flow_cfg(self) -> IntegratorConfig:
        return IntegratorConfig(horizon=self.horizon, steps=self.steps)

    def saturation_headroom(self, states: np.ndarray) -> np.ndarray:
        """Distance of the backup saturation argument from its identity core."""
        states = np.asarray(states, dtype=np.float64)
        z = np.einsum("j,...j->...", self.K, states)
        return (1.0 - self.sat_delta_backup) - np.abs(z)

    def expander(self, name: str) -> ControlLaw:
        table = {"linear": self.expander_linear, "timeopt": self.expander_timeopt}
        if name not in table:
            raise ValueError(f"unknown expander {name!r}, pick from {sorted(table)}")
        return table[name]

    def controller(self, variant: str) -> SwitchedController:
        if variant == "bcbf":
            expander = self.backup
        elif variant in ("gb", "gb-linear"):
            expander = self.expander_linear
        elif variant == "gb-timeopt":
            expander = self.expander_timeopt
        elif variant == "agb":
            expander = self.expander_adaptive
        else:
            raise ValueError(
                f"unknown variant {variant!r}, pick from "
                "['bcbf', 'gb', 'gb-linear', 'gb-timeopt', 'agb']")
        return SwitchedController(expander=expander, backup=self.backup,
                                  barrier=self.barrier, eps=self.eps)

    def problem(self, variant: str) -> FilterProblem:
        return FilterProblem(
            sys=self.sys,
            controller=self.controller(variant),
            safety=self.safety,
            barrier=self.barrier,
            box=self.box,
            nominal=self.nominal,
            flow_cfg=self.flow_cfg,
            weight=self.weight,
            alpha=ClassKappa(self.lam),
            alpha_terminal=ClassKappa(self.lam_terminal),
        )

    def adaptive_problem(self, gamma: float, rate_limit: Optional[float] = None,
                         rate_weight: float = 1e-2) -> AdaptiveFilterProblem:
        return make_adaptive_problem(self.problem("agb"), gamma=gamma,
                                     rate_limit=rate_limit,
                                     rate_weight=rate_weight)


def di_bundle(
    x_max: float = 1.0,
    K: Optional[np.ndarray] = None,
    K_e: Optional[np.ndarray] = None,
    rho: float = 0.15,
    Q: Optional[np.ndarray] = None,
    beta: float = 1e-9,
    eps: float = 1e-3,
    horizon: float = 2.0,
    steps: int = 200,
    sat_delta_backup: float = 0.005,
    sat_delta: float = 0.1,
    lam: float = 1.0,
    lam_terminal: float = 1.0,
    u_push: float = 1.0,
    weight: Optional[np.ndarray] = None,
) -> DoubleIntegratorBundle:
    """Build the wall benchmark; raises if the backup pair is invalid.

    The default gain row K = [2, 1.6] sits just under the non-saturation
    bound, so the backup saturation corners must stay narrow
    (sat_delta_backup small) for construction to go through.
    """
    K = np.array([2.0, 1.6]) if K is None else np.asarray(K, dtype=np.float64)
    K_e = 30.0 * K if K_e is None else np.asarray(K_e, dtype=np.float64)
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=np.float64)
    weight = np.array([[1.0]]) if weight is None \
        else np.asarray(weight, dtype=np.float64)
    if weight.shape != (1, 1) or weight[0, 0] <= 0.0:
        raise ValueError(f"weight must be a positive 1x1 matrix, got {weight}")
    if x_max <= 0.0:
        raise ValueError(f"wall half-width must be positive, got {x_max}")
    if rho <= 0.0:
        raise ValueError(f"backup level rho must be positive, got {rho}")

    a_cl = _A - _B @ K[None, :]
    P = solve_lyapunov(a_cl, Q)

    # non-saturation over the backup set: max |K x| = sqrt(rho) ||K P^(-1/2)||
    # must stay inside the saturation identity core
    peak_gain = float(np.sqrt(rho * K @ np.linalg.solve(P, K)))
    core_edge = 1.0 - sat_delta_backup
    if peak_gain > core_edge:
        raise ValueError(
            f"backup law saturates inside the backup set: max |K x| = "
            f"{peak_gain:.6f} exceeds the identity core edge {core_edge:.6f}")

    # containment in the safe strip: max |x1| over the ellipse boundary
    p_inv_11 = float(np.linalg.solve(P, np.array([1.0, 0.0]))[0])
    x1_peak = float(np.sqrt(rho * p_inv_11))
    if x1_peak > x_max:
        raise ValueError(
            f"backup set pokes through the wall: max |x1| = {x1_peak:.6f} "
            f"exceeds x_max = {x_max}")

    return DoubleIntegratorBundle(
        x_max=x_max, K=K, K_e=K_e, rho=rho, Q=Q, beta=beta, eps=eps,
        horizon=horizon, steps=steps, P=P,
        sat_delta_backup=sat_delta_backup, sat_delta=sat_delta,
        lam=lam, lam_terminal=lam_terminal, u_push=u_push,
        sys=linear_system(_A, _B),
        box=InputBox(-1.0, 1.0),
        safety=_wall_field(x_max),
        barrier=_ellipse_field(P, rho),
        backup=_saturated_gain_law(K, sat_delta_backup),
        expander_linear=_saturated_gain_law(K_e, sat_delta),
        expander_timeopt=_time_optimal_law(beta, sat_delta),
        expander_adaptive=_adaptive_gain_law(sat_delta),
        nominal=_constant_law(u_push, 1),
        weight=weight,
    )
