"""Empirical checks that a shipped backup pair actually is one.

A backup pair must satisfy three things: the backup law pushes the barrier up
(or at worst flat) on the boundary of the backup set, none of its saturations
leave their identity cores inside the set (the Lyapunov certificate covers
only the unsaturated law), and the set sits inside the safe region.  The
validator samples the ellipsoid deterministically and reports worst margins;
bundle factories run it at construction time and raise on failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import closed_loop_rhs

__all__ = ["BackupPairError", "BackupValidationReport", "validate_backup_pair"]

_DERIVATIVE_TOL = -1e-8


class BackupPairError(ValueError):
    """A shipped backup pair failed one of its construction checks."""


@dataclass(frozen=True)
class BackupValidationReport:
    """Worst margins over the sampled backup set; all must clear to pass."""

    boundary_derivative_min: float   # min grad h_b . (f + g k_b) on the boundary
    saturation_headroom_min: float   # min core distance over boundary + interior
    safety_margin_min: float         # min h over boundary + interior
    samples: int
    failures: tuple

    @property
    def passed(self) -> bool:
        return not self.failures


def _ellipsoid_samples(center, p_mat, rho, count, rng):
    """count boundary points and count interior points of (x-c)'P(x-c) <= rho."""
    n = center.size
    evals, evecs = np.linalg.eigh(p_mat)
    if np.any(evals <= 0.0):
        raise BackupPairError(f"backup set matrix is not positive definite: {evals}")
    p_inv_sqrt = evecs @ np.diag(evals ** -0.5) @ evecs.T
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    boundary = center + np.sqrt(rho) * d @ p_inv_sqrt.T
    radii = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / n)
    interior = center + np.sqrt(rho) * (radii * d) @ p_inv_sqrt.T
    return boundary, interior


def validate_backup_pair(
    bundle,
    samples: int = 400,
    seed: int = 0,
    rho_scale: float = 1.0,
) -> BackupValidationReport:
    """Sample-based audit of a bundle's backup pair.

    rho_scale inflates the sampled level set without rebuilding the bundle,
    for probing how much margin the shipped constants actually have.  Report
    only; raising is the caller's decision.
    """
    if samples < 1:
        raise ValueError(f"need at least one sample, got {samples}")
    if rho_scale <= 0.0:
        raise ValueError(f"rho_scale must be positive, got {rho_scale}")
    rng = np.random.default_rng(seed)
    center = np.asarray(bundle.barrier_center, dtype=np.float64)
    rho = rho_scale * bundle.rho
    boundary, interior = _ellipsoid_samples(center, bundle.P, rho, samples, rng)
    everywhere = np.vstack([boundary, interior])

    # Lyapunov push on the boundary: grad h_b = -2 P (x - c)
    grads = -2.0 * (boundary - center) @ bundle.P.T
    rhs = closed_loop_rhs(bundle.sys, bundle.backup, boundary)
    derivative_min = float(np.min(np.einsum("bi,bi->b", grads, rhs)))

    headroom_min = float(np.min(bundle.saturation_headroom(everywhere)))
    safety_min = float(np.min(bundle.safety.value(everywhere)))

    failures = []
    if derivative_min < _DERIVATIVE_TOL:
        failures.append(
            f"backup law loses the barrier on the boundary: min derivative "
            f"{derivative_min:.3e}")
    if headroom_min <= 0.0:
        failures.append(
            f"backup law saturates inside the backup set: min headroom "
            f"{headroom_min:.3e}")
    if safety_min < 0.0:
        failures.append(
            f"backup set leaves the safe region: min h {safety_min:.3e}")

    return BackupValidationReport(
        boundary_derivative_min=derivative_min,
        saturation_headroom_min=headroom_min,
        safety_margin_min=safety_min,
        samples=samples,
        failures=tuple(failures),
    )
