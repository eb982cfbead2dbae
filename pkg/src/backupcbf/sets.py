"""Implicit-set membership tests and phase-plane grid scans.

A state belongs to the implicit safe set when its switched flow keeps the
safety field nonnegative at every grid node and lands in the backup set at
the horizon.  Membership shares the integrator resolution with the filter so
set pictures and filter feasibility agree node for node.

Scans sweep one or two state coordinates over a rectangle and stream the
evaluation one grid row at a time: each row is a single batched rollout that
tracks running minima only, so memory stays at O(row) no matter the
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .filtering import FilterProblem
from .flows import rollout_extremes

__all__ = [
    "GridAxis",
    "GridScan",
    "MembershipRecord",
    "di_viability_oracle",
    "grid_scan",
    "implicit_membership",
    "membership_margins",
]


@dataclass(frozen=True)
class MembershipRecord:
    """Set-membership margins for one state.

    inside holds exactly when both margins are nonnegative; diverged flows
    report -inf margins.
    """

    traj_margin: float
    term_margin: float

    @property
    def inside(self) -> bool:
        return self.traj_margin >= 0.0 and self.term_margin >= 0.0


def membership_margins(
    problem: FilterProblem,
    states: np.ndarray,
    theta: Optional[np.ndarray] = None,
):
    """Batched membership margins: (traj_margin, term_margin) per state."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    running, x_end, ok = rollout_extremes(
        problem.sys, problem.controller, states, theta, problem.flow_cfg,
        problem.safety.value)
    term = np.where(ok, np.asarray(problem.barrier.value(x_end), dtype=np.float64),
                    -np.inf)
    return running, term


def implicit_membership(
    problem: FilterProblem,
    x: np.ndarray,
    theta: Optional[np.ndarray] = None,
) -> MembershipRecord:
    """Membership of a single state in the implicit safe set."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("implicit_membership takes a single state")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"state is not finite: {x}")
    traj, term = membership_margins(problem, x[None, :], theta)
    return MembershipRecord(traj_margin=float(traj[0]), term_margin=float(term[0]))


@dataclass(frozen=True)
class GridAxis:
    """One swept state coordinate of a scan."""

    index: int
    lo: float
    hi: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"axis needs at least one point, got {self.count}")
        if not self.lo < self.hi:
            raise ValueError(f"axis range is empty: [{self.lo}, {self.hi}]")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class GridScan:
    """Row-major membership margins over a 1-d or 2-d slice.

    Arrays are indexed [i] or [i, j] with the first axis outermost, matching
    the row-major cell order of the CSV emission.
    """

    axes: tuple
    base_state: np.ndarray
    traj_margin: np.ndarray
    term_margin: np.ndarray

    @property
    def inside(self) -> np.ndarray:
        return (self.traj_margin >= 0.0) & (self.term_margin >= 0.0)

    @property
    def inside_count(self) -> int:
        return int(np.count_nonzero(self.inside))


def grid_scan(
    problem: FilterProblem,
    axes: Sequence[GridAxis],
    base_state: np.ndarray,
    theta: Optional[np.ndarray] = None,
) -> GridScan:
    """Sweep membership over a rectangle of states.

    base_state supplies the coordinates the axes do not sweep (and must have
    the full state dimension).  Limited to one or two axes: the pictures this
    feeds are 2-d slices.
    """
    axes = tuple(axes)
    if not 1 <= len(axes) <= 2:
        raise ValueError(f"scans take 1 or 2 axes, got {len(axes)}")
    indices = [ax.index for ax in axes]
    if len(set(indices)) != len(indices):
        raise ValueError(f"axes sweep the same coordinate: {indices}")
    base_state = np.asarray(base_state, dtype=np.float64)
    if base_state.shape != (problem.sys.n,):
        raise ValueError(
            f"base state has shape {base_state.shape}, expected ({problem.sys.n},)")
    for ax in axes:
        if not 0 <= ax.index < problem.sys.n:
            raise ValueError(f"axis index {ax.index} outside state dimension")

    if len(axes) == 1:
        row = np.tile(base_state, (axes[0].count, 1))
        row[:, axes[0].index] = axes[0].values
        traj, term = membership_margins(problem, row, theta)
        return GridScan(axes=axes, base_state=base_state,
                        traj_margin=traj, term_margin=term)

    outer, inner = axes
    traj = np.empty((outer.count, inner.count))
    term = np.empty((outer.count, inner.count))
    row = np.tile(base_state, (inner.count, 1))
    row[:, inner.index] = inner.values
    for i, v in enumerate(outer.values):
        row[:, outer.index] = v
        traj[i], term[i] = membership_margins(problem, row, theta)
    return GridScan(axes=axes, base_state=base_state,
                    traj_margin=traj, term_margin=term)


def di_viability_oracle(x: np.ndarray, x_max: float, u_max: float = 1.0) -> np.ndarray:
    """Exact viability test for the double integrator with |u| <= u_max.

    A state can avoid both walls iff maximal braking stops it in time on the
    side its velocity points at: x1 + max(x2,0)^2/(2 u_max) <= x_max and
    x1 - max(-x2,0)^2/(2 u_max) >= -x_max.
    """
    x = np.asarray(x, dtype=np.float64)
    pos, vel = x[..., 0], x[..., 1]
    brake_right = pos + np.maximum(vel, 0.0) ** 2 / (2.0 * u_max)
    brake_left = pos - np.maximum(-vel, 0.0) ** 2 / (2.0 * u_max)
    result = (brake_right <= x_max) & (brake_left >= -x_max)
    return result if result.ndim else bool(result)
