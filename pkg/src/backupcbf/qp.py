"""Dense active-set solver for the small filter QPs.

minimize (u - u_nom)' W (u - u_nom)
subject to  a_i' u >= b_i  for every row, and  lo <= u <= hi.

Problems here are tiny (m <= 3 inputs plus a handful of binding rows), so a
deterministic active-set loop with dense KKT solves beats a general-purpose
solver on both speed and reproducibility: identical inputs take identical
pivot sequences and return identical bits.

The loop starts from the nominal input, repeatedly adds the most violated
constraint (lowest index on ties), solves the equality-constrained
subproblem, and drops active constraints whose multipliers go negative
(lowest index first).  When an incoming constraint is linearly dependent on
the active set, a dual step removes the blocking constraint chosen by the
usual multiplier ratio test; if no constraint blocks, the dependency is a
certificate that the QP is infeasible.  Iteration caps and singular solves
exit with a non-optimal status and the caller substitutes its fallback input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["QPSolution", "solve_box_qp"]

_FEAS_TOL = 1e-10
_MULT_TOL = 1e-10
_DEP_TOL = 1e-9


@dataclass(frozen=True)
class QPSolution:
    u: np.ndarray
    status: str  # "optimal" or "fallback"
    iterations: int
    reason: Optional[str] = None  # set when status != optimal


def _solve_eqp(h_mat, u_nom, c_mat, d_vec, active):
    """Equality-constrained minimizer and multipliers for the working set."""
    m = u_nom.size
    if not active:
        return u_nom.copy(), np.zeros(0)
    a_act = c_mat[active]
    k = len(active)
    kkt = np.zeros((m + k, m + k))
    kkt[:m, :m] = h_mat
    kkt[:m, m:] = -a_act.T
    kkt[m:, :m] = a_act
    rhs = np.concatenate([h_mat @ u_nom, d_vec[active]])
    sol = np.linalg.solve(kkt, rhs)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("non-finite subproblem solution")
    return sol[:m], sol[m:]


def solve_box_qp(
    u_nom: np.ndarray,
    weight: np.ndarray,
    rows_a: np.ndarray,
    rows_b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: Optional[int] = None,
) -> QPSolution:
    u_nom = np.asarray(u_nom, dtype=np.float64).ravel()
    m = u_nom.size
    weight = np.asarray(weight, dtype=np.float64)
    if weight.shape != (m, m):
        raise ValueError(f"weight is {weight.shape}, expected ({m}, {m})")
    if not np.allclose(weight, weight.T, atol=1e-12):
        raise ValueError("weight matrix must be symmetric")
    try:
        np.linalg.cholesky(weight)
    except np.linalg.LinAlgError:
        raise ValueError("weight matrix must be positive definite") from None

    rows_a = np.asarray(rows_a, dtype=np.float64).reshape(-1, m)
    rows_b = np.asarray(rows_b, dtype=np.float64).ravel()
    if rows_a.shape[0] != rows_b.size:
        raise ValueError("row matrix and offsets disagree on the row count")
    lo = np.asarray(lo, dtype=np.float64).ravel()
    hi = np.asarray(hi, dtype=np.float64).ravel()

    # constraint stack: rows first, then box faces, all as c' u >= d
    eye = np.eye(m)
    c_mat = np.vstack([rows_a, eye, -eye])
    d_vec = np.concatenate([rows_b, lo, -hi])
    cap = max_iter if max_iter is not None else 50 * (m + rows_a.shape[0])

    h_mat = 2.0 * weight
    u = np.clip(u_nom, lo, hi)
    active: list[int] = []
    iterations = 0
    status, reason = "fallback", "iteration cap reached"

    while iterations < cap:
        iterations += 1
        try:
            u_eq, lam = _solve_eqp(h_mat, u_nom, c_mat, d_vec, active)
        except np.linalg.LinAlgError:
            status, reason = "fallback", "singular subproblem"
            break

        negative = [idx for idx, mult in zip(active, lam) if mult < -_MULT_TOL]
        if negative:
            active.remove(min(negative))
            continue

        violation = d_vec - c_mat @ u_eq
        violation[active] = -np.inf
        worst = int(np.argmax(violation))
        if violation[worst] <= _FEAS_TOL:
            u = u_eq
            status, reason = "optimal", None
            break

        if active:
            # dual steps: clear any active constraints that make the incoming
            # one linearly dependent before adding it to the working set
            blocked = False
            while active:
                a_act = c_mat[active]
                gram = a_act @ a_act.T
                try:
                    combo = np.linalg.solve(gram, a_act @ c_mat[worst])
                except np.linalg.LinAlgError:
                    status, reason = "fallback", "singular subproblem"
                    blocked = True
                    break
                residual = c_mat[worst] - a_act.T @ combo
                if np.linalg.norm(residual) > _DEP_TOL:
                    break  # independent; safe to add
                positive = [(idx, cmb, mult) for idx, cmb, mult
                            in zip(active, combo, lam) if cmb > _MULT_TOL]
                if not positive:
                    status, reason = "fallback", "infeasible rows"
                    blocked = True
                    break
                ratios = [mult / cmb for _, cmb, mult in positive]
                best = min(range(len(positive)),
                           key=lambda i: (ratios[i], positive[i][0]))
                active.remove(positive[best][0])
                try:
                    u_eq, lam = _solve_eqp(h_mat, u_nom, c_mat, d_vec, active)
                except np.linalg.LinAlgError:
                    status, reason = "fallback", "singular subproblem"
                    blocked = True
                    break
            if blocked:
                break
        active.append(worst)

    # box bounds hold exactly regardless of solve tolerances
    u = np.clip(u, lo, hi)
    return QPSolution(u=u, status=status, iterations=iterations, reason=reason)
