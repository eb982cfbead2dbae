"""Planar quadrotor landing benchmark.

State (x, z, theta, xdot, zdot, thetadot); thrust F in [0, F_max] along the
body axis and moment M in [-M_max, M_max] with

    x'' = F sin(theta)/m,  z'' = F cos(theta)/m - g,  theta'' = -M/J.

The safe region is a landing corridor between two walls plus all of the
airspace above them: safe iff (x in [x_L, x_R] and z >= z_L) or z >= z_T.
The corridor is smoothed with one-sided soft min/max so the smoothed field
never exceeds the exact polytopic one.

The backup law is a saturated PD cascade toward a hover point inside the
corridor: outer PD accelerations pick a desired pitch and thrust, an inner PD
tracks the pitch.  The same structure serves as the expander (with its own,
more aggressive gains), as the adaptation target (the six gains become the
parameters), and as the nominal controller (aimed at the goal instead).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..adaptive import AdaptiveFilterProblem, make_adaptive_problem
from ..dynamics import ControlLaw, InputBox, ScalarField, SystemModel, closed_loop_jacobian, solve_lyapunov
from ..filtering import ClassKappa, FilterProblem
from ..flows import IntegratorConfig
from ..smoothing import (
    default_sat_delta,
    smooth_max,
    smooth_max_grad,
    smooth_min,
    smooth_min_grad,
    smooth_sat,
    smooth_sat_grad,
)
from ..switching import SwitchedController
from .validation import BackupPairError, validate_backup_pair

__all__ = ["QuadrotorBundle", "quad_bundle"]

GAIN_LABELS = ("kp_x", "kd_x", "kp_z", "kd_z", "kp_th", "kd_th")


def quadrotor_system(mass: float, inertia: float, g_d: float) -> SystemModel:
    def f(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        out[..., 0] = x[..., 3]
        out[..., 1] = x[..., 4]
        out[..., 2] = x[..., 5]
        out[..., 4] = -g_d
        return out

    def g(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[:-1] + (6, 2))
        out[..., 3, 0] = np.sin(x[..., 2]) / mass
        out[..., 4, 0] = np.cos(x[..., 2]) / mass
        out[..., 5, 1] = -1.0 / inertia
        return out

    def df_dx(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[:-1] + (6, 6))
        out[..., 0, 3] = 1.0
        out[..., 1, 4] = 1.0
        out[..., 2, 5] = 1.0
        return out

    def dg_dx(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[:-1] + (2, 6, 6))
        out[..., 0, 3, 2] = np.cos(x[..., 2]) / mass
        out[..., 0, 4, 2] = -np.sin(x[..., 2]) / mass
        return out

    return SystemModel(n=6, m=2, f=f, g=g, df_dx=df_dx, dg_dx=dg_dx)


@dataclass(frozen=True)
class _PDLawSpec:
    """Shared geometry and limits of the PD landing laws."""

    target_x: float
    target_z: float
    mass: float
    inertia: float
    g_d: float
    f_max: float
    m_max: float
    pitch_max: float
    az_floor: float
    delta_f: float
    delta_m: float
    delta_pitch: float


def _pd_terms(spec: _PDLawSpec, x, gains):
    """Forward pass shared by value and both Jacobians."""
    x = np.asarray(x, dtype=np.float64)
    kp_x, kd_x, kp_z, kd_z, kp_th, kd_th = (gains[..., i] for i in range(6))
    dx_pos = x[..., 0] - spec.target_x
    dz_pos = x[..., 1] - spec.target_z
    a_x = -kp_x * dx_pos - kd_x * x[..., 3]
    a_z = -kp_z * dz_pos - kd_z * x[..., 4] + spec.g_d
    az_f = np.maximum(a_z, spec.az_floor)
    pitch_raw = np.arctan2(a_x, az_f)
    pitch_d = np.asarray(smooth_sat(pitch_raw, -spec.pitch_max, spec.pitch_max,
                                    spec.delta_pitch))
    thrust_raw = spec.mass * np.sqrt(a_x ** 2 + a_z ** 2)
    moment_raw = spec.inertia * (kp_th * (x[..., 2] - pitch_d)
                                 + kd_th * x[..., 5])
    return (x, dx_pos, dz_pos, a_x, a_z, az_f, pitch_raw, pitch_d,
            thrust_raw, moment_raw)


def _pd_value(spec: _PDLawSpec, x, gains):
    *_, thrust_raw, moment_raw = _pd_terms(spec, x, gains)
    thrust = np.asarray(smooth_sat(thrust_raw, 0.0, spec.f_max, spec.delta_f))
    moment = np.asarray(smooth_sat(moment_raw, -spec.m_max, spec.m_max,
                                   spec.delta_m))
    return np.stack([thrust, moment], axis=-1)


def _pd_jacobians(spec: _PDLawSpec, x, gains, want_params: bool):
    """State Jacobian (..., 2, 6) and, optionally, the gain Jacobian."""
    (x, dx_pos, dz_pos, a_x, a_z, az_f, pitch_raw, pitch_d,
     thrust_raw, moment_raw) = _pd_terms(spec, x, gains)
    kp_x, kd_x, kp_z, kd_z, kp_th, kd_th = (gains[..., i] for i in range(6))
    batch = x.shape[:-1]

    unfloored = (a_z > spec.az_floor).astype(np.float64)
    r2 = a_x ** 2 + az_f ** 2
    rr = np.sqrt(a_x ** 2 + a_z ** 2)
    rr_safe = np.maximum(rr, 1e-12)
    pitch_slope = np.asarray(smooth_sat_grad(
        pitch_raw, -spec.pitch_max, spec.pitch_max, spec.delta_pitch))
    thrust_slope = np.asarray(smooth_sat_grad(thrust_raw, 0.0, spec.f_max,
                                              spec.delta_f))
    moment_slope = np.asarray(smooth_sat_grad(moment_raw, -spec.m_max,
                                              spec.m_max, spec.delta_m))

    # d a_x / dx and d a_z / dx over the six state coordinates
    dax = np.zeros(batch + (6,))
    dax[..., 0] = -kp_x
    dax[..., 3] = -kd_x
    daz = np.zeros(batch + (6,))
    daz[..., 1] = -kp_z
    daz[..., 4] = -kd_z
    dazf = unfloored[..., None] * daz

    dpitch_raw = (az_f[..., None] * dax - a_x[..., None] * dazf) / r2[..., None]
    dpitch_d = pitch_slope[..., None] * dpitch_raw
    dthrust_raw = spec.mass * (a_x[..., None] * dax + a_z[..., None] * daz) \
        / rr_safe[..., None]
    dthrust = thrust_slope[..., None] * dthrust_raw

    dmoment_raw = -kp_th[..., None] * dpitch_d
    dmoment_raw[..., 2] += kp_th
    dmoment_raw[..., 5] += kd_th
    dmoment = moment_slope[..., None] * spec.inertia * dmoment_raw

    jac_x = np.stack([dthrust, dmoment], axis=-2)
    if not want_params:
        return jac_x, None

    # the same chain with a_x, a_z differentiated in the six gains
    dax_p = np.zeros(batch + (6,))
    dax_p[..., 0] = -dx_pos
    dax_p[..., 1] = -x[..., 3]
    daz_p = np.zeros(batch + (6,))
    daz_p[..., 2] = -dz_pos
    daz_p[..., 3] = -x[..., 4]
    dazf_p = unfloored[..., None] * daz_p

    dpitch_raw_p = (az_f[..., None] * dax_p - a_x[..., None] * dazf_p) \
        / r2[..., None]
    dpitch_d_p = pitch_slope[..., None] * dpitch_raw_p
    dthrust_p = thrust_slope[..., None] * spec.mass \
        * (a_x[..., None] * dax_p + a_z[..., None] * daz_p) / rr_safe[..., None]

    dmoment_raw_p = -kp_th[..., None] * dpitch_d_p
    dmoment_raw_p[..., 4] += x[..., 2] - pitch_d
    dmoment_raw_p[..., 5] += x[..., 5]
    dmoment_p = moment_slope[..., None] * spec.inertia * dmoment_raw_p

    return jac_x, np.stack([dthrust_p, dmoment_p], axis=-2)


def _pd_law(spec: _PDLawSpec, gains: Optional[np.ndarray]) -> ControlLaw:
    """Fixed-gain law when gains is given, parameterized law otherwise."""
    if gains is not None:
        fixed = np.asarray(gains, dtype=np.float64)

        def value(x, theta=None):
            return _pd_value(spec, x, fixed)

        def dx(x, theta=None):
            return _pd_jacobians(spec, x, fixed, want_params=False)[0]

        return ControlLaw(dim_params=0, value=value, dx=dx)

    def value(x, theta):
        return _pd_value(spec, x, np.asarray(theta, dtype=np.float64))

    def dx(x, theta):
        return _pd_jacobians(spec, x, np.asarray(theta, dtype=np.float64),
                             want_params=False)[0]

    def dtheta(x, theta):
        return _pd_jacobians(spec, x, np.asarray(theta, dtype=np.float64),
                             want_params=True)[1]

    return ControlLaw(dim_params=6, value=value, dx=dx, dtheta=dtheta)


def _corridor_fields(x_l, x_r, z_l, z_t, kappa):
    """Smoothed and exact safety fields for the landing corridor."""

    def parts(x):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([x[..., 0] - x_l, x_r - x[..., 0], x[..., 1] - z_l],
                        axis=-1), x[..., 1] - z_t

    def value(x):
        inner, above = parts(x)
        stacked = np.stack([np.asarray(smooth_min(inner, kappa)), above], axis=-1)
        return smooth_max(stacked, kappa)

    def grad(x):
        x = np.asarray(x, dtype=np.float64)
        inner, above = parts(x)
        w_min = np.asarray(smooth_min_grad(inner, kappa))
        stacked = np.stack([np.asarray(smooth_min(inner, kappa)), above], axis=-1)
        w_max = np.asarray(smooth_max_grad(stacked, kappa))
        out = np.zeros_like(x)
        out[..., 0] = w_max[..., 0] * (w_min[..., 0] - w_min[..., 1])
        out[..., 1] = w_max[..., 0] * w_min[..., 2] + w_max[..., 1]
        return out

    def exact(x):
        inner, above = parts(x)
        return np.maximum(np.min(inner, axis=-1), above)

    return ScalarField(value=value, grad=grad), exact


def _ellipsoid_field(center: np.ndarray, p_mat: np.ndarray, rho: float) -> ScalarField:
    def value(x):
        d = np.asarray(x, dtype=np.float64) - center
        return rho - np.einsum("...i,ij,...j->...", d, p_mat, d)

    def grad(x):
        d = np.asarray(x, dtype=np.float64) - center
        return -2.0 * np.einsum("ij,...j->...i", p_mat, d)

    return ScalarField(value=value, grad=grad)


@dataclass(frozen=True)
class QuadrotorBundle:
    """Landing benchmark: geometry, physics, gains, and ready-made problems."""

    mass: float
    inertia: float
    g_d: float
    f_max: float
    m_max: float
    x_l: float
    x_r: float
    z_l: float
    z_t: float
    goal: np.ndarray
    hover: np.ndarray
    backup_gains: np.ndarray
    expander_gains: np.ndarray
    nominal_gains: np.ndarray
    rho: float
    eps: float
    horizon: float
    steps: int
    kappa: float
    gamma: float
    pitch_max: float
    P: np.ndarray
    lam: float
    lam_terminal: float
    sys: SystemModel = field(repr=False)
    box: InputBox = field(repr=False)
    safety: ScalarField = field(repr=False)
    exact_safety: object = field(repr=False)
    barrier: ScalarField = field(repr=False)
    backup: ControlLaw = field(repr=False)
    expander: ControlLaw = field(repr=False)
    expander_adaptive: ControlLaw = field(repr=False)
    nominal: ControlLaw = field(repr=False)
    weight: np.ndarray = field(repr=False)
    backup_spec: _PDLawSpec = field(repr=False)

    @property
    def barrier_center(self) -> np.ndarray:
        center = np.zeros(6)
        center[:2] = self.hover
        return center

    @property
    def theta0(self) -> np.ndarray:
        """Initial adaptation parameters: the expander gain vector."""
        return self.expander_gains.copy()

    @property
    def flow_cfg(self) -> IntegratorConfig:
        return IntegratorConfig(horizon=self.horizon, steps=self.steps)

    def saturation_headroom(self, states: np.ndarray) -> np.ndarray:
        """Worst identity-core distance across the backup law's saturations.

        Also folds in the arctan denominator floor: a positive return means
        no saturation is active and the floor is untouched.
        """
        spec = self.backup_spec
        gains = np.broadcast_to(self.backup_gains,
                                np.shape(np.asarray(states))[:-1] + (6,))
        (_, _, _, _, a_z, _, pitch_raw, _, thrust_raw,
         moment_raw) = _pd_terms(spec, states, gains)
        margins = [
            (spec.pitch_max - spec.delta_pitch) - np.abs(pitch_raw),
            np.minimum(thrust_raw - spec.delta_f,
                       (spec.f_max - spec.delta_f) - thrust_raw),
            (spec.m_max - spec.delta_m) - np.abs(moment_raw),
            a_z - spec.az_floor,
        ]
        return np.min(np.stack(margins, axis=-1), axis=-1)

    def controller(self, variant: str) -> SwitchedController:
        if variant == "bcbf":
            expander = self.backup
        elif variant in ("gb", "gb-linear"):
            expander = self.expander
        elif variant == "agb":
            expander = self.expander_adaptive
        else:
            raise ValueError(
                f"unknown variant {variant!r}, pick from ['bcbf', 'gb', 'agb']")
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

    def adaptive_problem(self, gamma: Optional[float] = None,
                         rate_limit: Optional[float] = None,
                         rate_weight: float = 1e-2) -> AdaptiveFilterProblem:
        return make_adaptive_problem(
            self.problem("agb"),
            gamma=self.gamma if gamma is None else gamma,
            rate_limit=rate_limit,
            rate_weight=rate_weight,
        )


def quad_bundle(
    mass: float = 1.0,
    inertia: float = 0.25,
    g_d: float = 9.81,
    f_max: float = 12.0,
    m_max: float = 12.0,
    x_l: float = -1.5,
    x_r: float = 1.5,
    z_l: float = 0.0,
    z_t: float = 4.0,
    goal: tuple = (0.0, 0.35),
    hover: tuple = (0.0, 3.0),
    backup_gains: Optional[np.ndarray] = None,
    expander_gains: Optional[np.ndarray] = None,
    nominal_gains: Optional[np.ndarray] = None,
    rho: float = 0.22,
    eps: float = 0.01,
    horizon: float = 6.75,
    steps: int = 100,
    kappa: float = 10.0,
    gamma: float = 10.0,
    pitch_max: float = np.pi / 4,
    lam: float = 1.0,
    lam_terminal: float = 1.0,
    weight: Optional[np.ndarray] = None,
    validation_samples: int = 400,
) -> QuadrotorBundle:
    """Build the landing benchmark; raises if the backup pair fails its audit.

    The physical constants are fixed by the task; the corridor geometry,
    hover/goal placement, and the three gain sets are tuning choices checked
    at construction (Hurwitz hover linearization, no saturation over the
    backup set, containment in the corridor).
    """
    if not x_r > x_l:
        raise ValueError(f"corridor needs x_r > x_l, got [{x_l}, {x_r}]")
    if not z_t > z_l:
        raise ValueError(f"corridor needs z_t > z_l, got [{z_l}, {z_t}]")
    backup_gains = np.array([0.45, 0.9, 0.09, 0.6, 9.0, 6.0]) \
        if backup_gains is None else np.asarray(backup_gains, dtype=np.float64)
    expander_gains = np.array([1.8, 1.8, 0.2, 0.9, 36.0, 12.0]) \
        if expander_gains is None else np.asarray(expander_gains, dtype=np.float64)
    nominal_gains = np.array([1.0, 1.4, 1.0, 1.8, 16.0, 8.0]) \
        if nominal_gains is None else np.asarray(nominal_gains, dtype=np.float64)
    for name, gains in (("backup", backup_gains), ("expander", expander_gains),
                        ("nominal", nominal_gains)):
        if gains.shape != (6,) or np.any(gains <= 0.0):
            raise ValueError(f"{name} gains must be six positive values, got {gains}")
    weight = np.diag([1.0, 1.0]) if weight is None \
        else np.asarray(weight, dtype=np.float64)
    if weight.shape != (2, 2) or np.any(np.linalg.eigvalsh(weight) <= 0.0):
        raise ValueError(f"weight must be a positive definite 2x2 matrix, got {weight}")

    sys = quadrotor_system(mass, inertia, g_d)
    spec_args = dict(
        mass=mass, inertia=inertia, g_d=g_d, f_max=f_max, m_max=m_max,
        pitch_max=pitch_max, az_floor=0.1 * g_d,
        delta_f=default_sat_delta(0.0, f_max),
        delta_m=default_sat_delta(-m_max, m_max),
        delta_pitch=default_sat_delta(-pitch_max, pitch_max),
    )
    hover = np.asarray(hover, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    backup_spec = _PDLawSpec(target_x=hover[0], target_z=hover[1], **spec_args)
    goal_spec = _PDLawSpec(target_x=goal[0], target_z=goal[1], **spec_args)

    backup = _pd_law(backup_spec, backup_gains)
    x_star = np.zeros(6)
    x_star[:2] = hover

    a_cl = closed_loop_jacobian(sys, backup, x_star)
    try:
        P = solve_lyapunov(a_cl, np.eye(6))
    except Exception as err:
        raise BackupPairError(
            f"hover linearization under the backup law is not Hurwitz: {err}"
        ) from err

    safety, exact_safety = _corridor_fields(x_l, x_r, z_l, z_t, kappa)
    if not safety.value(x_star) > 0.0:
        raise BackupPairError(
            f"hover point {hover} is not strictly inside the safe corridor")

    bundle = QuadrotorBundle(
        mass=mass, inertia=inertia, g_d=g_d, f_max=f_max, m_max=m_max,
        x_l=x_l, x_r=x_r, z_l=z_l, z_t=z_t, goal=goal, hover=hover,
        backup_gains=backup_gains, expander_gains=expander_gains,
        nominal_gains=nominal_gains, rho=rho, eps=eps, horizon=horizon,
        steps=steps, kappa=kappa, gamma=gamma, pitch_max=pitch_max, P=P,
        lam=lam, lam_terminal=lam_terminal,
        sys=sys,
        box=InputBox(np.array([0.0, -m_max]), np.array([f_max, m_max])),
        safety=safety,
        exact_safety=exact_safety,
        barrier=_ellipsoid_field(x_star, P, rho),
        backup=backup,
        expander=_pd_law(backup_spec, expander_gains),
        expander_adaptive=_pd_law(backup_spec, None),
        nominal=_pd_law(goal_spec, nominal_gains),
        weight=weight,
        backup_spec=backup_spec,
    )
    report = validate_backup_pair(bundle, samples=validation_samples)
    if not report.passed:
        raise BackupPairError("; ".join(report.failures))
    return bundle
