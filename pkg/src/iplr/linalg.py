"""Shape utilities (vec/mat, transpose permutation) and a dense Cholesky probe.

The column-stacking convention is column-major throughout: vec(M) stacks the
columns of M one under the other, so vec(A X B) = (B^T kron A) vec(X).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


def vec(M: np.ndarray) -> np.ndarray:
    """Stack the columns of M into a single vector (column-major)."""
    return np.asarray(M).reshape(-1, order="F")


def mat(v: np.ndarray, p: int, q: int) -> np.ndarray:
    """Inverse of vec: reshape a length p*q vector into a p x q matrix."""
    v = np.asarray(v)
    if v.size != p * q:
        raise ValueError(f"cannot reshape vector of length {v.size} into {p}x{q}")
    return v.reshape((p, q), order="F")


def apply_transpose_perm(v: np.ndarray, n: int, r: int) -> np.ndarray:
    """Return vec(mat(v, n, r)^T) without materializing the permutation.

    Applying again with (r, n) swapped inverts the permutation.
    """
    return vec(mat(v, n, r).T)


def try_cholesky(S: np.ndarray) -> np.ndarray | None:
    """Lower Cholesky factor of (S + S^T)/2, or None if not positive definite.

    Failure is an ordinary value (it drives the dual backtracking loop), but
    non-finite entries are a hard error because they indicate corrupted state.
    """
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix contains NaN or Inf entries")
    S = 0.5 * (S + S.T)
    try:
        return scipy.linalg.cholesky(S, lower=True)
    except scipy.linalg.LinAlgError:
        return None
