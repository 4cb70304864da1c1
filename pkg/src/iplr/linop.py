"""Matrix-free application of the constraint operator and its adjoint.

All contractions run over the fixed nonzero pattern of the constraint
matrices, so costs scale with nnz(A) rather than n^2. A module-level touch
counter (test instrumentation, not thread-safe) records how many pattern
entries each contraction visits.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .problem import CompletionOperator, SdpProblem

_touches = 0


def reset_touches() -> None:
    global _touches
    _touches = 0


def touches() -> int:
    return _touches


def pattern(problem: SdpProblem):
    """Flat nonzero pattern (rows, cols, vals, constraint index), both triangles."""
    op = problem.constraints
    return op.pat_rows, op.pat_cols, op.pat_vals, op.pat_cidx


def diag_mask(problem: SdpProblem) -> np.ndarray:
    op = problem.constraints
    cached = getattr(op, "_diag_mask", None)
    if cached is None:
        cached = op.pat_rows == op.pat_cols
        op._diag_mask = cached
    return cached


def contract_values(problem: SdpProblem, entry_values: np.ndarray) -> np.ndarray:
    """(A_i . M)_i given the values of M at the pattern positions."""
    global _touches
    op = problem.constraints
    _touches += len(entry_values)
    return np.bincount(op.pat_cidx, weights=op.pat_vals * entry_values, minlength=op.m)


def at_product(problem: SdpProblem, w: np.ndarray, U: np.ndarray,
               U_cols: np.ndarray | None = None) -> np.ndarray:
    """(A^T w) U as an (n, r) matrix without materializing A^T w.

    Column a accumulates vals * w_i * U[col, a] into the pattern rows; the
    optional U_cols argument reuses a cached U[pattern cols] gather.
    """
    rows, cols, vals, cidx = pattern(problem)
    if U_cols is None:
        U_cols = U[cols]
    wv = vals * np.asarray(w)[cidx]
    n, r = problem.n, U.shape[1]
    out = np.empty((n, r))
    for a in range(r):
        out[:, a] = np.bincount(rows, weights=wv * U_cols[:, a], minlength=n)
    return out


def apply_A_lowrank(problem: SdpProblem, U: np.ndarray, mu: float) -> np.ndarray:
    """A(mu*I + U U^T) touching only the pattern entries of U U^T.

    For the completion operator the mu*I term vanishes (zero diagonals) and
    component i is simply (U_top U_bot^T)_{s_i, t_i}.
    """
    rows, cols, _, _ = pattern(problem)
    if U.shape[0] != problem.n:
        raise ValueError(f"factor has {U.shape[0]} rows, expected {problem.n}")
    ev = np.einsum("ij,ij->i", U[rows], U[cols])
    if mu != 0.0:
        dm = diag_mask(problem)
        if dm.any():
            ev = ev + mu * dm
    return contract_values(problem, ev)


def apply_A_dense(problem: SdpProblem, M: np.ndarray) -> np.ndarray:
    """(A_i . M)_i for an explicit n x n matrix (M need not be symmetric)."""
    rows, cols, _, _ = pattern(problem)
    return contract_values(problem, M[rows, cols])


def _at_struct(problem: SdpProblem):
    # cached CSR skeleton of A^T(w): unique sorted positions + source-entry map
    op = problem.constraints
    cached = getattr(op, "_at_cache", None)
    if cached is None:
        n = problem.n
        key = op.pat_rows.astype(np.int64) * n + op.pat_cols
        uniq, inverse = np.unique(key, return_inverse=True)
        proto = sp.csr_matrix(
            (np.zeros(len(uniq)), (uniq // n, uniq % n)), shape=(n, n)
        )
        proto.sort_indices()
        cached = (proto.indices, proto.indptr, inverse, len(uniq))
        op._at_cache = cached
    return cached


def apply_AT(problem: SdpProblem, w: np.ndarray) -> sp.csr_matrix:
    """Adjoint sum_i w_i A_i as a sparse symmetric matrix with fixed pattern."""
    op = problem.constraints
    w = np.asarray(w, dtype=float)
    if len(w) != op.m:
        raise ValueError(f"weight vector has length {len(w)}, expected {op.m}")
    indices, indptr, inverse, nu = _at_struct(problem)
    data = np.bincount(inverse, weights=op.pat_vals * w[op.pat_cidx], minlength=nu)
    return sp.csr_matrix((data, indices, indptr), shape=(problem.n, problem.n))


def _slack_struct(problem: SdpProblem):
    # cached CSR skeleton of S = C - A^T(y) over the union pattern
    op = problem.constraints
    cached = getattr(op, "_slack_cache", None)
    if cached is None:
        n = problem.n
        Cc = problem.C.tocoo()
        rows = np.concatenate([Cc.row.astype(np.int64), op.pat_rows])
        cols = np.concatenate([Cc.col.astype(np.int64), op.pat_cols])
        key = rows * n + cols
        uniq, inverse = np.unique(key, return_inverse=True)
        proto = sp.csr_matrix(
            (np.zeros(len(uniq)), (uniq // n, uniq % n)), shape=(n, n)
        )
        proto.sort_indices()
        nc = len(Cc.data)
        cached = (proto.indices, proto.indptr, inverse[:nc], inverse[nc:],
                  Cc.data.copy(), len(uniq))
        op._slack_cache = cached
    return cached


def dual_slack(problem: SdpProblem, y: np.ndarray) -> sp.csr_matrix:
    """S = C - A^T(y) with a symbolic structure built once per problem."""
    op = problem.constraints
    indices, indptr, inv_c, inv_p, c_data, nu = _slack_struct(problem)
    data = np.bincount(inv_c, weights=c_data, minlength=nu)
    data -= np.bincount(inv_p, weights=op.pat_vals * np.asarray(y)[op.pat_cidx],
                        minlength=nu)
    return sp.csr_matrix((data, indices, indptr), shape=(problem.n, problem.n))


def gram_matrix(problem: SdpProblem) -> np.ndarray:
    """Dense Gram matrix (A A^T)_{ij} = A_i . A_j (cached per problem)."""
    op = problem.constraints
    cached = getattr(op, "_gram_cache", None)
    if cached is None:
        n = problem.n
        Amat = sp.csr_matrix(
            (op.pat_vals,
             (op.pat_cidx, op.pat_rows.astype(np.int64) * n + op.pat_cols)),
            shape=(op.m, n * n),
        )
        cached = np.asarray((Amat @ Amat.T).todense())
        op._gram_cache = cached
    return cached


def _gram_cho(problem: SdpProblem):
    op = problem.constraints
    cached = getattr(op, "_gram_cho_cache", None)
    if cached is None:
        G = gram_matrix(problem)
        try:
            cached = scipy.linalg.cho_factor(G, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError(
                "Gram matrix A A^T is singular: constraint matrices are "
                "linearly dependent"
            ) from exc
        op._gram_cho_cache = cached
    return cached


def apply_AAt(problem: SdpProblem, w: np.ndarray) -> np.ndarray:
    """(A A^T) w; identity/2 for the completion operator."""
    if isinstance(problem.constraints, CompletionOperator):
        return 0.5 * np.asarray(w, dtype=float)
    G = gram_matrix(problem)
    return G @ np.asarray(w, dtype=float)


def solve_AAt(problem: SdpProblem, d: np.ndarray) -> np.ndarray:
    """(A A^T)^{-1} d.

    The completion operator needs no factorization (A A^T = I/2, so the
    result is 2d); the general operator factorizes the Gram matrix once and
    caches the factor.
    """
    d = np.asarray(d, dtype=float)
    if isinstance(problem.constraints, CompletionOperator):
        return 2.0 * d
    return scipy.linalg.cho_solve(_gram_cho(problem), d)
