"""Problem data model for low-rank SDPs and matrix-completion instance generators.

Two constraint-operator representations are supported: a general list of
sparse symmetric matrices, and a specialized operator for the SDP
reformulation of matrix completion, where constraint i pins the (s_i, t_i)
entry of the off-diagonal block of

    X = [[W1, Xbar], [Xbar^T, W2]],   n = 2*nhat.

Indices are 0-based internally (file formats and the CLI are 1-based).
Random generation uses NumPy's PCG64 generator (``numpy.random.default_rng``),
so seeds are portable across platforms and versions that provide it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class CompletionOperator:
    """Constraint operator for the matrix-completion SDP.

    Each constraint matrix has exactly two nonzero entries of value 1/2, at
    (s, nhat + t) and (nhat + t, s). Consequences used throughout: the
    operator annihilates the identity, and the Gram matrix A A^T equals
    I_m / 2.
    """

    def __init__(self, nhat: int, pairs: np.ndarray):
        pairs = np.asarray(pairs, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("pairs must be an (m, 2) array of 0-based indices")
        if pairs.shape[0] == 0:
            raise ValueError("constraint set must be nonempty (m >= 1)")
        if pairs.min() < 0 or pairs.max() >= nhat:
            raise ValueError(f"entry indices must lie in [0, {nhat - 1}]")
        codes = pairs[:, 0] * nhat + pairs[:, 1]
        if len(np.unique(codes)) != len(codes):
            dup = pairs[np.where(np.bincount(codes).max() > 1)[0][:1]]
            raise ValueError(f"duplicate observed entry (first duplicate near {dup})")
        self.nhat = int(nhat)
        self.n = 2 * self.nhat
        self.m = pairs.shape[0]
        self.s_idx = pairs[:, 0].copy()
        self.t_idx = pairs[:, 1].copy()
        # full nonzero pattern, both triangles: value 1/2 at (s, nhat+t), (nhat+t, s)
        tcol = self.nhat + self.t_idx
        self.pat_rows = np.concatenate([self.s_idx, tcol])
        self.pat_cols = np.concatenate([tcol, self.s_idx])
        self.pat_vals = np.full(2 * self.m, 0.5)
        self.pat_cidx = np.concatenate([np.arange(self.m), np.arange(self.m)])

    @property
    def nnz(self) -> int:
        return 2 * self.m


class GeneralOperator:
    """Constraint operator storing m sparse symmetric matrices in coordinate form.

    Only the upper triangle of each A_i is kept; contraction doubles the
    off-diagonal terms. The full both-triangle pattern is precomputed for the
    matrix-free products (they may contract against nonsymmetric matrices).
    """

    def __init__(self, matrices: Sequence, n: int, sym_tol: float = 1e-12):
        if len(matrices) == 0:
            raise ValueError("constraint set must be nonempty (m >= 1)")
        self.n = int(n)
        self.m = len(matrices)
        up_rows, up_cols, up_vals, up_cidx = [], [], [], []
        for i, M in enumerate(matrices):
            M = sp.coo_matrix(M)
            if M.shape != (n, n):
                raise ValueError(f"constraint {i} has shape {M.shape}, expected {(n, n)}")
            asym = abs(M - M.T).max() if M.nnz else 0.0
            scale = abs(M).max() if M.nnz else 1.0
            if asym > sym_tol * max(scale, 1.0):
                raise ValueError(f"constraint {i} is not symmetric")
            M = sp.triu(0.5 * (M + M.T)).tocoo()
            up_rows.append(M.row)
            up_cols.append(M.col)
            up_vals.append(M.data)
            up_cidx.append(np.full(M.nnz, i, dtype=np.int64))
        rows = np.concatenate(up_rows)
        cols = np.concatenate(up_cols)
        vals = np.concatenate(up_vals)
        cidx = np.concatenate(up_cidx)
        off = rows != cols
        self.pat_rows = np.concatenate([rows, cols[off]])
        self.pat_cols = np.concatenate([cols, rows[off]])
        self.pat_vals = np.concatenate([vals, vals[off]])
        self.pat_cidx = np.concatenate([cidx, cidx[off]])

    @property
    def nnz(self) -> int:
        return len(self.pat_rows)


@dataclass
class SdpProblem:
    """Data of min C . X  s.t.  A_i . X = b_i, X psd."""

    n: int
    m: int
    constraints: CompletionOperator | GeneralOperator
    C: sp.csr_matrix
    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if len(self.b) != self.m:
            raise ValueError("b length does not match constraint count")
        if self.C.shape != (self.n, self.n):
            raise ValueError("cost matrix has wrong shape")

    @property
    def nhat(self) -> int | None:
        op = self.constraints
        return op.nhat if isinstance(op, CompletionOperator) else None


@dataclass
class LowRankPrimal:
    """Implicit primal iterate X = mu*I + U U^T (never stored densely)."""

    U: np.ndarray
    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    @property
    def r(self) -> int:
        return self.U.shape[1]

    def dense(self) -> np.ndarray:
        n = self.U.shape[0]
        return self.mu * np.eye(n) + self.U @ self.U.T


@dataclass
class DualState:
    """Dual multiplier with the Cholesky factor of S = C - A^T(y).

    S is never stored independently of (C, y); the factor doubles as the
    positive-definiteness certificate.
    """

    y: np.ndarray
    chol: np.ndarray


@dataclass
class GroundTruth:
    """Matrix to be recovered plus a record of how it was generated."""

    B: np.ndarray
    rank: int
    info: dict = field(default_factory=dict)


def build_mc_problem(entries: Sequence[tuple[int, int, float]], nhat: int) -> SdpProblem:
    """Assemble the matrix-completion SDP from observed entries.

    ``entries`` holds 0-based (s, t, value) triples; constraint i is aligned
    with entry i, b_i = value_i, and the cost matrix is I_n / 2 with n = 2*nhat.
    """
    entries = list(entries)
    if len(entries) == 0:
        raise ValueError("at least one observed entry is required")
    pairs = np.array([(s, t) for s, t, _ in entries], dtype=np.int64)
    b = np.array([v for _, _, v in entries], dtype=float)
    op = CompletionOperator(nhat, pairs)
    C = sp.identity(op.n, format="csr") * 0.5
    return SdpProblem(n=op.n, m=op.m, constraints=op, C=C, b=b)


def default_sample_count(nhat: int, r: int) -> int:
    """Default number of observed entries, m = c * r * (2*nhat - r), c = 0.01*nhat + 4."""
    c = 0.01 * nhat + 4.0
    return int(round(c * r * (2 * nhat - r)))


def generate_random_lowrank(nhat: int, r: int, seed: int) -> GroundTruth:
    """B = B_L B_R with iid standard-normal factors of shape (nhat, r), (r, nhat)."""
    if not 1 <= r <= nhat:
        raise ValueError("rank must satisfy 1 <= r <= nhat")
    rng = np.random.default_rng(seed)
    BL = rng.standard_normal((nhat, r))
    BR = rng.standard_normal((r, nhat))
    return GroundTruth(B=BL @ BR, rank=r, info={"generator": "lowrank", "seed": seed})


def generate_conditioned(nhat: int, r: int, kappa: float, seed: int) -> GroundTruth:
    """Rank-r matrix with singular values equally spaced from nhat down to nhat/kappa."""
    if kappa < 1:
        raise ValueError("condition number must be >= 1")
    if not 1 <= r <= nhat:
        raise ValueError("rank must satisfy 1 <= r <= nhat")
    if r == 1 and kappa != 1:
        raise ValueError("a rank-1 matrix has condition number 1; kappa must be 1")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((nhat, nhat))
    Q, _, Vt = np.linalg.svd(G)
    sigma = np.linspace(nhat, nhat / kappa, r)
    B = (Q[:, :r] * sigma) @ Vt[:r, :]
    return GroundTruth(
        B=B, rank=r, info={"generator": "conditioned", "seed": seed, "kappa": kappa}
    )


def perturb_singular_values(gt: GroundTruth, xi: float, seed: int) -> GroundTruth:
    """Add xi * g_i to every singular value of B (including the zero ones).

    The result is full rank with probability 1 but within O(xi * sqrt(nhat))
    of B in Frobenius norm; used to produce nearly low-rank targets.
    """
    if xi < 0:
        raise ValueError("perturbation scale must be nonnegative")
    if xi == 0:
        return GroundTruth(B=gt.B.copy(), rank=gt.rank, info=dict(gt.info))
    rng = np.random.default_rng(seed)
    Q, sigma, Vt = np.linalg.svd(gt.B)
    sigma = sigma + xi * rng.standard_normal(len(sigma))
    B = (Q * sigma) @ Vt
    info = dict(gt.info)
    info.update({"xi": xi, "perturb_seed": seed, "base_rank": gt.rank})
    return GroundTruth(B=B, rank=min(B.shape), info=info)


def sample_omega(nhat: int, m: int, seed: int) -> np.ndarray:
    """m distinct (s, t) pairs, uniform without replacement, as an (m, 2) array."""
    if m > nhat * nhat:
        raise ValueError(f"cannot sample {m} distinct pairs from a {nhat}x{nhat} grid")
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    codes = rng.choice(nhat * nhat, size=m, replace=False)
    return np.column_stack([codes // nhat, codes % nhat]).astype(np.int64)


def add_noise(b: np.ndarray, eta: float, seed: int) -> np.ndarray:
    """Corrupt each observation: b_i + eta * g_i with g iid standard normal."""
    if eta < 0:
        raise ValueError("noise level must be nonnegative")
    b = np.asarray(b, dtype=float)
    if eta == 0:
        return b.copy()
    rng = np.random.default_rng(seed)
    return b + eta * rng.standard_normal(len(b))


def extract_recovered(U, nhat: int | None = None) -> np.ndarray:
    """Off-diagonal block Xbar = U_top U_bot^T of the implicit primal.

    The mu*I term of X = mu*I + U U^T only touches the diagonal blocks, so
    Xbar has rank at most r exactly. Accepts a LowRankPrimal or a factor U.
    """
    if isinstance(U, LowRankPrimal):
        U = U.U
    U = np.asarray(U)
    rows = U.shape[0]
    if rows % 2 != 0:
        raise ValueError("factor must have an even number of rows (n = 2*nhat)")
    if nhat is None:
        nhat = rows // 2
    if rows != 2 * nhat:
        raise ValueError(f"factor has {rows} rows, expected {2 * nhat}")
    return U[:nhat] @ U[nhat:].T
