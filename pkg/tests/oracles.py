"""Dense reference constructions used to check the matrix-free kernels.

Everything here materializes the objects the production code must never
form: the packed constraint matrix A (m x n^2), the transpose permutation,
the Q matrix, full Jacobian blocks, and the dense preconditioners. Sizes
are kept tiny; these exist only to pin down expected values independently.
"""

import numpy as np

from iplr import linop
from iplr.linalg import mat, vec


def dense_A(problem) -> np.ndarray:
    """Packed operator with rows vec(A_i)^T, so A vec(X) = (A_i . X)_i."""
    n, m = problem.n, problem.m
    rows, cols, vals, cidx = linop.pattern(problem)
    A = np.zeros((m, n * n))
    for p, q, v, i in zip(rows, cols, vals, cidx):
        A[i, q * n + p] += v
    return A


def transpose_perm_matrix(n: int, r: int) -> np.ndarray:
    """Permutation with vec(B^T) = Pi vec(B) for B of shape (n, r)."""
    P = np.zeros((n * r, n * r))
    for i in range(n * r):
        e = np.zeros(n * r)
        e[i] = 1.0
        P[:, i] = vec(mat(e, n, r).T)
    return P


def q_matrix(U: np.ndarray) -> np.ndarray:
    """Q = (U kron I) + (I kron U) Pi, the derivative of U -> vec(U U^T)."""
    n, r = U.shape
    return (np.kron(U, np.eye(n))
            + np.kron(np.eye(n), U) @ transpose_perm_matrix(n, r))


def dense_S(problem, y: np.ndarray) -> np.ndarray:
    A = dense_A(problem)
    n = problem.n
    return problem.C.toarray() - mat(A.T @ y, n, n)


def dense_X(U: np.ndarray, mu: float) -> np.ndarray:
    n = U.shape[0]
    return mu * np.eye(n) + U @ U.T


def jacobian_blocks(problem, U: np.ndarray, y: np.ndarray, mu: float):
    """(J11, J21, J22) in their packed dense forms."""
    A = dense_A(problem)
    n = problem.n
    Q = q_matrix(U)
    S = dense_S(problem, y)
    X = dense_X(U, mu)
    J11 = A @ Q
    J21 = np.kron(S, np.eye(n)) @ Q
    J22 = -np.kron(np.eye(n), X) @ A.T
    return J11, J21, J22


def dense_residuals(problem, U: np.ndarray, y: np.ndarray, mu: float):
    A = dense_A(problem)
    X = dense_X(U, mu)
    S = dense_S(problem, y)
    F1 = A @ vec(X) - problem.b
    F2 = X @ S - mu * np.eye(problem.n)
    phi = 0.5 * (F1 @ F1 + np.sum(F2 * F2))
    return F1, F2, phi


def dense_gradient(problem, U: np.ndarray, y: np.ndarray, mu: float):
    """Stacked J^T F, split as (G_U matrix, g_y vector)."""
    J11, J21, J22 = jacobian_blocks(problem, U, y, mu)
    F1, F2, _ = dense_residuals(problem, U, y, mu)
    gu = J11.T @ F1 + J21.T @ vec(F2)
    gy = J22.T @ vec(F2)
    return mat(gu, U.shape[0], U.shape[1]), gy


def dense_dual_normal(problem, U: np.ndarray, mu: float) -> np.ndarray:
    """A (I kron X^2) A^T, the coefficient matrix of the dual step."""
    A = dense_A(problem)
    X = dense_X(U, mu)
    return A @ np.kron(np.eye(problem.n), X @ X) @ A.T


def dense_Z(problem, U: np.ndarray, squared: bool = False) -> np.ndarray:
    """A (I kron U), or A (I kron U U^T) for the fat variant."""
    A = dense_A(problem)
    W = U @ U.T if squared else U
    return A @ np.kron(np.eye(problem.n), W)


def dense_preconditioner(problem, U: np.ndarray, mu: float,
                         squared: bool = False) -> np.ndarray:
    A = dense_A(problem)
    Z = dense_Z(problem, U, squared=squared)
    return mu * (A @ A.T) + Z @ Z.T
