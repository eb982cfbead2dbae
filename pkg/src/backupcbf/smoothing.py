"""Smooth scalar primitives shared by the controllers and barrier functions.

Everything here is C^1 by construction: a cubic blend step for controller
switching, a saturation with quadratic corner blends that is exactly the
identity on a core interval, and log-sum-exp under-approximations of min and
max.  All functions broadcast over a leading batch axis and ship analytic
gradients next to the values so Jacobians downstream never fall back to
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SmoothingParams",
    "smoothstep",
    "smoothstep_grad",
    "smooth_sat",
    "smooth_sat_grad",
    "smooth_min",
    "smooth_min_grad",
    "smooth_max",
    "smooth_max_grad",
]


@dataclass(frozen=True)
class SmoothingParams:
    """Shared smoothing knobs: blend width, saturation corner, log-sum-exp gain."""

    eps_switch: float = 1e-3
    delta_sat: float = 0.1
    kappa: float = 10.0

    def __post_init__(self) -> None:
        if self.eps_switch <= 0.0:
            raise ValueError(f"eps_switch must be positive, got {self.eps_switch}")
        if self.delta_sat <= 0.0:
            raise ValueError(f"delta_sat must be positive, got {self.delta_sat}")
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


def default_sat_delta(lo: float, hi: float) -> float:
    """Corner half-width used when a saturation does not pin its own."""
    return 0.1 * (hi - lo) / 2.0


def _check_eps(eps: float) -> None:
    if eps <= 0.0:
        raise ValueError(f"blend width must be positive, got {eps}")


def smoothstep(z, eps: float):
    """Cubic blend: 0 for z <= -eps, 1 for z >= 0, C^1 in between."""
    _check_eps(eps)
    z = np.asarray(z, dtype=np.float64)
    s = np.clip((z + eps) / eps, 0.0, 1.0)
    out = s * s * (3.0 - 2.0 * s)
    # force the flats to exact 0/1 so the switched law can short-circuit
    out = np.where(z <= -eps, 0.0, out)
    out = np.where(z >= 0.0, 1.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def smoothstep_grad(z, eps: float):
    """Derivative of :func:`smoothstep` with respect to z."""
    _check_eps(eps)
    z = np.asarray(z, dtype=np.float64)
    s = (z + eps) / eps
    inside = (z > -eps) & (z < 0.0)
    out = np.where(inside, 6.0 * s * (1.0 - s) / eps, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _check_interval(lo: float, hi: float, delta: float) -> None:
    if not hi > lo:
        raise ValueError(f"saturation interval is degenerate: [{lo}, {hi}]")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if 2.0 * delta > hi - lo:
        raise ValueError(
            f"delta={delta} too wide for interval [{lo}, {hi}]; core would vanish"
        )


def smooth_sat(z, lo: float = -1.0, hi: float = 1.0, delta: float | None = None):
    """C^1 saturation onto [lo, hi], exactly the identity on [lo+delta, hi-delta].

    The corners are quadratic blends of half-width delta:
    hi - (hi + delta - z)^2 / (4 delta) on the upper corner, mirrored below.
    """
    if delta is None:
        delta = default_sat_delta(lo, hi)
    _check_interval(lo, hi, delta)
    z = np.asarray(z, dtype=np.float64)
    upper = hi - (hi + delta - z) ** 2 / (4.0 * delta)
    lower = lo + (z - (lo - delta)) ** 2 / (4.0 * delta)
    out = np.where(z > hi - delta, upper, z)
    out = np.where(z < lo + delta, lower, out)
    out = np.where(z >= hi + delta, hi, out)
    out = np.where(z <= lo - delta, lo, out)
    if out.ndim == 0:
        return float(out)
    return out


def smooth_sat_grad(z, lo: float = -1.0, hi: float = 1.0, delta: float | None = None):
    """Derivative of :func:`smooth_sat` with respect to z (1 on the core)."""
    if delta is None:
        delta = default_sat_delta(lo, hi)
    _check_interval(lo, hi, delta)
    z = np.asarray(z, dtype=np.float64)
    out = np.where(z > hi - delta, (hi + delta - z) / (2.0 * delta), 1.0)
    out = np.where(z < lo + delta, (z - lo + delta) / (2.0 * delta), out)
    out = np.where((z >= hi + delta) | (z <= lo - delta), 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def _check_values(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise ValueError("need at least one value to reduce")
    return v


def smooth_min(values, kappa: float = 10.0):
    """Soft minimum -(1/kappa) log sum exp(-kappa v); never exceeds min(v)."""
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    v = _check_values(values)
    m = np.min(v, axis=-1)
    # shift by the true min so the exponentials cannot overflow
    out = m - np.log(np.sum(np.exp(-kappa * (v - m[..., None])), axis=-1)) / kappa
    if out.ndim == 0:
        return float(out)
    return out


def smooth_min_grad(values, kappa: float = 10.0):
    """Gradient of :func:`smooth_min`: the softmin weights, summing to one."""
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    v = _check_values(values)
    m = np.min(v, axis=-1, keepdims=True)
    w = np.exp(-kappa * (v - m))
    return w / np.sum(w, axis=-1, keepdims=True)


def smooth_max(values, kappa: float = 10.0):
    """Soft maximum (1/kappa)(log sum exp(kappa v) - log k); never exceeds max(v).

    The -log(k) shift keeps the approximation one-sided, which is what makes
    the smoothed barrier a sound under-approximation of the exact one.
    """
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    v = _check_values(values)
    k = v.shape[-1]
    m = np.max(v, axis=-1)
    lse = np.log(np.sum(np.exp(kappa * (v - m[..., None])), axis=-1))
    out = m + (lse - np.log(k)) / kappa
    if out.ndim == 0:
        return float(out)
    return out


def smooth_max_grad(values, kappa: float = 10.0):
    """Gradient of :func:`smooth_max`: the softmax weights, summing to one."""
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    v = _check_values(values)
    m = np.max(v, axis=-1, keepdims=True)
    w = np.exp(kappa * (v - m))
    return w / np.sum(w, axis=-1, keepdims=True)
