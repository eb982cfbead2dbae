"""Blended expander/backup controller.

The switched law is k_s(x) = (1 - eta) k_e(x, theta) + eta k_b(x) with
eta = smoothstep(h_b(x), eps): exactly the backup law on the backup set,
exactly the expander once h_b <= -eps, and a C^1 convex blend on the band in
between.  Exactness on the flats is enforced bitwise so downstream
set-membership special cases (expander == backup) collapse cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ControlLaw, ScalarField
from .smoothing import smoothstep, smoothstep_grad

__all__ = ["SwitchedController"]


@dataclass(frozen=True)
class SwitchedController:
    """Convex blend of an expander law and a backup law, gated by h_b."""

    expander: ControlLaw
    backup: ControlLaw
    barrier: ScalarField
    eps: float

    def __post_init__(self) -> None:
        if self.eps <= 0.0:
            raise ValueError(f"blend width eps must be positive, got {self.eps}")
        if self.backup.dim_params != 0:
            raise ValueError("backup law must not be parameterized")

    @property
    def dim_params(self) -> int:
        return self.expander.dim_params

    def eta(self, x: np.ndarray):
        return smoothstep(self.barrier.value(x), self.eps)

    def value(self, x: np.ndarray, theta: Optional[np.ndarray] = None) -> np.ndarray:
        eta = np.asarray(self.eta(x), dtype=np.float64)[..., None]
        # off the blend band only one law is live; skip the other
        if np.all(eta == 1.0):
            return np.asarray(self.backup.value(x, None), dtype=np.float64)
        if np.all(eta == 0.0):
            return np.asarray(self.expander.value(x, theta), dtype=np.float64)
        ue = np.asarray(self.expander.value(x, theta), dtype=np.float64)
        ub = np.asarray(self.backup.value(x, None), dtype=np.float64)
        blend = (1.0 - eta) * ue + eta * ub
        # fp guard: the exact blend lies between the two laws componentwise
        blend = np.clip(blend, np.minimum(ue, ub), np.maximum(ue, ub))
        out = np.where(eta == 1.0, ub, np.where(eta == 0.0, ue, blend))
        return out

    def dx(self, x: np.ndarray, theta: Optional[np.ndarray] = None) -> np.ndarray:
        hb = np.asarray(self.barrier.value(x), dtype=np.float64)
        eta = np.asarray(smoothstep(hb, self.eps), dtype=np.float64)
        # the C1 step has zero slope off the band, so these are exact
        if np.all(eta == 1.0):
            return np.asarray(self.backup.dx(x, None), dtype=np.float64)
        if np.all(eta == 0.0):
            return np.asarray(self.expander.dx(x, theta), dtype=np.float64)
        je = np.asarray(self.expander.dx(x, theta), dtype=np.float64)
        jb = np.asarray(self.backup.dx(x, None), dtype=np.float64)
        jac = (1.0 - eta[..., None, None]) * je + eta[..., None, None] * jb
        # same fp guard as value(): the exact blend is inside the envelope
        jac = np.clip(jac, np.minimum(je, jb), np.maximum(je, jb))
        band = np.asarray(smoothstep_grad(hb, self.eps), dtype=np.float64)
        if np.any(band != 0.0):
            ue = np.asarray(self.expander.value(x, theta), dtype=np.float64)
            ub = np.asarray(self.backup.value(x, None), dtype=np.float64)
            grad_eta = band[..., None] * np.asarray(self.barrier.grad(x), dtype=np.float64)
            jac = jac + (ub - ue)[..., :, None] * grad_eta[..., None, :]
        return jac

    def dtheta(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.expander.dim_params == 0:
            raise ValueError("expander carries no parameters")
        eta = np.asarray(self.eta(x), dtype=np.float64)
        de = np.asarray(self.expander.dtheta(x, theta), dtype=np.float64)
        return (1.0 - eta[..., None, None]) * de

    def as_law(self) -> ControlLaw:
        """View the switched controller as a plain ControlLaw."""
        dtheta = self.dtheta if self.expander.dim_params > 0 else None
        return ControlLaw(dim_params=self.expander.dim_params,
                          value=self.value, dx=self.dx, dtheta=dtheta)
