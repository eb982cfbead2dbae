"""Shipped scenarios: the exact runs the repo's configs and tests exercise.

These builders are the source of truth; the JSON files under configs/ mirror
them for CLI use and a test keeps the two in sync.
"""

from __future__ import annotations

import numpy as np

from .sim import Scenario

__all__ = ["di_wall", "quad_landing", "SHIPPED", "shipped_scenario"]


def di_wall(variant: str) -> Scenario:
    """Constant push toward the right wall from mid-strip rest.

    The nominal input saturates the box on approach, the filter takes over
    near the implicit-set boundary, and the state parks just inside it.
    """
    return Scenario(
        bundle_id="double_integrator",
        variant=variant,
        x0=np.array([-0.5, 0.0]),
        duration=4.0,
        dt=0.01,
        gamma=25.0 if variant == "agb" else None,
    )


def quad_landing(variant: str) -> Scenario:
    """Descend from hover height toward a goal near the floor.

    The nominal law wants the low goal; how far each variant lets it descend
    is decided by the return-by-horizon terminal constraint.
    """
    return Scenario(
        bundle_id="quadrotor",
        variant=variant,
        x0=np.array([-1.0, 3.0, 0.0, 0.0, 0.0, 0.0]),
        duration=8.0,
        dt=0.02,
    )


SHIPPED = {
    "di-wall-bcbf": lambda: di_wall("bcbf"),
    "di-wall-gb": lambda: di_wall("gb"),
    "di-wall-agb": lambda: di_wall("agb"),
    "quad-landing-bcbf": lambda: quad_landing("bcbf"),
    "quad-landing-gb": lambda: quad_landing("gb"),
    "quad-landing-agb": lambda: quad_landing("agb"),
}


def shipped_scenario(name: str) -> Scenario:
    if name not in SHIPPED:
        raise ValueError(f"unknown scenario {name!r}, pick from {sorted(SHIPPED)}")
    return SHIPPED[name]()
