"""Conjugate gradient over abstract operators with minimum-norm semantics.

The iteration always starts from the zero vector: for singular consistent
systems this keeps every iterate in the range of the operator, so CG
converges to the minimum-norm solution. Stopping is on the true (that is,
unpreconditioned) relative residual even when a preconditioner is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class KrylovStats:
    iterations: int
    relative_residual: float
    converged: bool
    breakdown: bool = False


def cg(apply: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
       tol: float = 1e-6, maxit: int = 100,
       precond: Callable[[np.ndarray], np.ndarray] | None = None):
    """Solve apply(x) = rhs for a symmetric positive semidefinite operator.

    Returns (x, KrylovStats). On curvature breakdown (a direction with
    p^T A p nonpositive beyond round-off, detected scale-invariantly as
    p^T A p <= 1e-14 * ||p|| * ||A p||) the best iterate so far is returned
    with converged=False and the breakdown flag set.
    """
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs))
    x = np.zeros_like(rhs)
    if rhs_norm == 0.0:
        return x, KrylovStats(iterations=0, relative_residual=0.0, converged=True)

    r = rhs.copy()
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    res_norm = rhs_norm

    for it in range(1, maxit + 1):
        Ap = apply(p)
        curv = float(p @ Ap)
        if curv <= 1e-14 * float(np.linalg.norm(p)) * float(np.linalg.norm(Ap)):
            return x, KrylovStats(iterations=it - 1,
                                  relative_residual=res_norm / rhs_norm,
                                  converged=False, breakdown=True)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        res_norm = float(np.linalg.norm(r))
        if res_norm <= tol * rhs_norm:
            return x, KrylovStats(iterations=it,
                                  relative_residual=res_norm / rhs_norm,
                                  converged=True)
        z = precond(r) if precond is not None else r
        rz_next = float(r @ z)
        beta = rz_next / rz
        rz = rz_next
        p = z + beta * p

    return x, KrylovStats(iterations=maxit,
                          relative_residual=res_norm / rhs_norm,
                          converged=False)
