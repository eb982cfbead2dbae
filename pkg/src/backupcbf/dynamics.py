"""Control-affine model types and closed-loop composition.

Systems are x' = f(x) + g(x) u with box-bounded inputs.  All callables follow
one broadcasting convention: states may carry a leading batch axis, so

    f(x): (..., n)          g(x): (..., n, m)
    df_dx(x): (..., n, n)   dg_dx(x): (..., m, n, n)  (stacked per channel)
    law.value(x, theta): (..., m)     field.value(x): (...)

Parameters theta stay a flat (p,) vector; parameter batching happens by
augmenting them into the state, never here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "InputBox",
    "SystemModel",
    "ControlLaw",
    "ScalarField",
    "LyapunovError",
    "linear_system",
    "closed_loop_rhs",
    "closed_loop_jacobian",
    "numeric_jacobian",
    "numeric_gradient",
    "solve_lyapunov",
]


class LyapunovError(ValueError):
    """Raised when the closed-loop matrix is not Hurwitz or the solve is bad."""


def numeric_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian used as a fallback for user-supplied maps."""
    x = np.asarray(x, dtype=np.float64)
    f0 = np.asarray(fn(x), dtype=np.float64)
    out = np.zeros(f0.shape + (x.shape[-1],))
    for j in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., j] = step
        out[..., j] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * step)
    return out


def numeric_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                     step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar field."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for j in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., j] = step
        out[..., j] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return out


@dataclass(frozen=True)
class InputBox:
    """Componentwise input bounds lo <= u <= hi."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=np.float64)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=np.float64)))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if not np.all(self.lo < self.hi):
            raise ValueError(f"box is degenerate: lo={self.lo}, hi={self.hi}")

    @property
    def dim(self) -> int:
        return self.lo.size

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lo, self.hi)

    def contains(self, u: np.ndarray, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=np.float64)
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))

    @staticmethod
    def concat(first: "InputBox", second: "InputBox") -> "InputBox":
        return InputBox(np.concatenate([first.lo, second.lo]),
                        np.concatenate([first.hi, second.hi]))


@dataclass(frozen=True)
class SystemModel:
    """Control-affine dynamics with analytic (or fallback) Jacobians."""

    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    df_dx: Callable[[np.ndarray], np.ndarray]
    dg_dx: Callable[[np.ndarray], np.ndarray]

    @staticmethod
    def from_callables(n: int, m: int, f, g, df_dx=None, dg_dx=None,
                       fd_step: float = 1e-6) -> "SystemModel":
        """Build a model, filling missing Jacobians with central differences."""
        if df_dx is None:
            df_dx = lambda x: numeric_jacobian(f, x, fd_step)
        if dg_dx is None:
            def dg_dx(x, _g=g, _m=m, _step=fd_step):
                # columns of g, differentiated one channel at a time
                stacked = [numeric_jacobian(lambda y: _g(y)[..., k], x, _step)
                           for k in range(_m)]
                return np.stack(stacked, axis=-3)
        return SystemModel(n=n, m=m, f=f, g=g, df_dx=df_dx, dg_dx=dg_dx)


@dataclass(frozen=True)
class ControlLaw:
    """Feedback law u = k(x, theta) with Jacobians in x and theta.

    dim_params is the number of adaptable parameters p; laws with p = 0 ignore
    theta entirely and carry dtheta = None.
    """

    dim_params: int
    value: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]
    dx: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]
    dtheta: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.dim_params < 0:
            raise ValueError("dim_params must be nonnegative")
        if self.dim_params > 0 and self.dtheta is None:
            raise ValueError("parameterized law needs a dtheta Jacobian")

    @staticmethod
    def from_value(value, dim_params: int = 0, fd_step: float = 1e-6) -> "ControlLaw":
        """Wrap a bare value callable, deriving Jacobians by finite differences."""
        def dx(x, theta=None):
            return numeric_jacobian(lambda y: value(y, theta), x, fd_step)

        dtheta = None
        if dim_params > 0:
            def dtheta(x, theta):
                return numeric_jacobian(lambda t: value(x, t), np.asarray(theta, float), fd_step)
        return ControlLaw(dim_params=dim_params, value=value, dx=dx, dtheta=dtheta)


@dataclass(frozen=True)
class ScalarField:
    """Differentiable scalar function of the state, e.g. a barrier function."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]

    @staticmethod
    def from_value(value, fd_step: float = 1e-6) -> "ScalarField":
        return ScalarField(value=value,
                           grad=lambda x: numeric_gradient(value, x, fd_step))


def linear_system(a: np.ndarray, b: np.ndarray) -> SystemModel:
    """LTI convenience constructor: f = A x, g = B."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = b[:, None]
    n, m = b.shape
    if a.shape != (n, n):
        raise ValueError(f"A is {a.shape}, expected ({n}, {n})")
    zeros_dg = np.zeros((m, n, n))

    def f(x):
        return np.einsum("ij,...j->...i", a, np.asarray(x, dtype=np.float64))

    def g(x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(b, x.shape[:-1] + (n, m))

    def df_dx(x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(a, x.shape[:-1] + (n, n))

    def dg_dx(x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(zeros_dg, x.shape[:-1] + (m, n, n))

    return SystemModel(n=n, m=m, f=f, g=g, df_dx=df_dx, dg_dx=dg_dx)


def closed_loop_rhs(sys: SystemModel, law: ControlLaw, x: np.ndarray,
                    theta: Optional[np.ndarray] = None) -> np.ndarray:
    """f(x) + g(x) k(x, theta)."""
    u = law.value(x, theta)
    return sys.f(x) + np.einsum("...nm,...m->...n", sys.g(x), u)


def closed_loop_jacobian(sys: SystemModel, law: ControlLaw, x: np.ndarray,
                         theta: Optional[np.ndarray] = None) -> np.ndarray:
    """d/dx of the closed loop: df + sum_k u_k dg_k + g dk/dx."""
    u = law.value(x, theta)
    jac = sys.df_dx(x) + np.einsum("...k,...kij->...ij", u, sys.dg_dx(x))
    return jac + sys.g(x) @ law.dx(x, theta)


def solve_lyapunov(a_cl: np.ndarray, q: np.ndarray,
                   residual_tol: float = 1e-8) -> np.ndarray:
    """Solve A' P + P A = -Q by dense vectorization; A must be Hurwitz.

    Fine at these sizes (n <= 6); the Kronecker system is n^2 x n^2.
    """
    a_cl = np.asarray(a_cl, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    n = a_cl.shape[0]
    if a_cl.shape != (n, n) or q.shape != (n, n):
        raise ValueError(f"shape mismatch: A is {a_cl.shape}, Q is {q.shape}")
    if not np.allclose(q, q.T, atol=1e-12):
        raise ValueError("Q must be symmetric")
    eigs = np.linalg.eigvals(a_cl)
    if np.max(eigs.real) >= 0.0:
        raise LyapunovError(
            "closed-loop matrix is not Hurwitz; eigenvalues: "
            + ", ".join(f"{e:.6g}" for e in np.sort_complex(eigs))
        )
    eye = np.eye(n)
    kron = np.kron(eye, a_cl.T) + np.kron(a_cl.T, eye)
    vec_p = np.linalg.solve(kron, -q.reshape(-1, order="F"))
    p = vec_p.reshape(n, n, order="F")
    p = 0.5 * (p + p.T)
    residual = np.max(np.abs(a_cl.T @ p + p @ a_cl + q))
    if residual > residual_tol:
        raise LyapunovError(f"Lyapunov residual {residual:.3e} exceeds {residual_tol:.1e}")
    return p
