"""Schur-complement preconditioner P = mu*AA^T + Z Z^T for the dual normal system.

Z = A(I kron U) is applied matrix-free in both directions; applying P^{-1}
reduces to the small system E v = Z^T (mu AA^T)^{-1} d with
E = I + Z^T (mu AA^T)^{-1} Z, solved by CG preconditioned with the
block-diagonal part M of E (n blocks of size r x r, each I_r plus a Gram
matrix, inverted once at build time).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linop
from .krylov import cg
from .linalg import mat, vec
from .problem import CompletionOperator, SdpProblem


@dataclass
class DualPreconditioner:
    problem: SdpProblem
    U: np.ndarray
    mu: float
    Minv: np.ndarray                 # (n, r, r) inverted diagonal blocks of E
    tol: float = 1e-8
    maxit: int = 100
    inner_iterations: int = field(default=0, compare=False)
    warned: bool = field(default=False, compare=False)

    def __post_init__(self):
        # Z = A(I kron U) realized from the constraint pattern: entry (p, q)
        # of A_i with value v contributes v * U[p, :] to row i, columns of
        # the q-th r-block. Z has O(nnz(A) r) stored entries; the dense
        # m x nr matrix is never formed.
        rows, cols, vals, cidx = linop.pattern(self.problem)
        r = self.U.shape[1]
        coo_rows = np.repeat(cidx, r)
        coo_cols = (cols[:, None] * r + np.arange(r)).ravel()
        data = (vals[:, None] * self.U[rows]).ravel()
        m, n = self.problem.m, self.problem.n
        self._Z = sp.csr_matrix((data, (coo_rows, coo_cols)), shape=(m, n * r))
        self._Zt = self._Z.T.tocsr()

    @property
    def r(self) -> int:
        return self.U.shape[1]

    # Z v = A(U mat(v)) for v = vec of an (r, n) matrix
    def z_apply(self, v: np.ndarray) -> np.ndarray:
        return self._Z @ v

    # Z^T w = vec(U^T (A^T w))
    def zt_apply(self, w: np.ndarray) -> np.ndarray:
        return self._Zt @ w

    def _e_apply(self, v: np.ndarray) -> np.ndarray:
        return v + self.zt_apply(
            linop.solve_AAt(self.problem, self.z_apply(v))) / self.mu

    def _m_solve(self, v: np.ndarray) -> np.ndarray:
        Vm = mat(v, self.r, self.problem.n)
        return vec(np.einsum("jab,bj->aj", self.Minv, Vm))

    def apply(self, d: np.ndarray) -> np.ndarray:
        """u = P^{-1} d via the Schur route (solve for v, then back-substitute)."""
        g = linop.solve_AAt(self.problem, d) / self.mu
        rhs = self.zt_apply(g)
        v, stats = cg(self._e_apply, rhs, tol=self.tol, maxit=self.maxit,
                      precond=self._m_solve)
        if not stats.converged:
            self.warned = True
        self.inner_iterations += stats.iterations
        return linop.solve_AAt(self.problem, d - self.z_apply(v)) / self.mu

    __call__ = apply


def _blocks_completion(problem: SdpProblem, U: np.ndarray, mu: float) -> np.ndarray:
    """Diagonal r x r blocks of Z^T (mu AA^T)^{-1} Z for the completion operator.

    (mu AA^T)^{-1} = (2/mu) I and column q of any A_i holds at most one
    value, so block q accumulates (2/mu) * vals^2 * u_p u_p^T over the
    pattern entries (p, q); the symmetric blocks are built from
    r(r+1)/2 bincounts.
    """
    n, r = U.shape
    rows, cols, vals, _ = linop.pattern(problem)
    w = (2.0 / mu) * vals * vals
    Ur = U[rows]
    blocks = np.empty((n, r, r))
    for a in range(r):
        for b in range(a, r):
            acc = np.bincount(cols, weights=w * Ur[:, a] * Ur[:, b], minlength=n)
            blocks[:, a, b] = acc
            if b != a:
                blocks[:, b, a] = acc
    return blocks


def _blocks_general(problem: SdpProblem, U: np.ndarray, mu: float) -> np.ndarray:
    """Diagonal blocks via an explicit Z (desk-scale path for general operators)."""
    n, r = U.shape
    m = problem.m
    rows, cols, vals, cidx = linop.pattern(problem)
    Z = np.zeros((m, n, r))
    np.add.at(Z, (cidx, cols), vals[:, None] * U[rows])
    W = linop.solve_AAt(problem, Z.reshape(m, n * r)).reshape(m, n, r) / mu
    return np.einsum("mqa,mqb->qab", Z, W)


def build_preconditioner(problem: SdpProblem, U: np.ndarray, mu: float,
                         tol: float = 1e-8, maxit: int = 100) -> DualPreconditioner:
    """Assemble P^{-1} machinery for the current (U, mu).

    The blocks of M = I + blockdiag(Z^T (mu AA^T)^{-1} Z) are each I_r plus a
    positive semidefinite Gram matrix, hence safely invertible.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    U = np.asarray(U, dtype=float)
    if isinstance(problem.constraints, CompletionOperator):
        blocks = _blocks_completion(problem, U, mu)
    else:
        blocks = _blocks_general(problem, U, mu)
    blocks[:, np.arange(U.shape[1]), np.arange(U.shape[1])] += 1.0
    return DualPreconditioner(problem=problem, U=U, mu=float(mu),
                              Minv=np.linalg.inv(blocks), tol=tol, maxit=maxit)
