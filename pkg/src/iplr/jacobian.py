"""Residuals, merit function, gradient, and matrix-free Jacobian block products.

The least-squares residual of the relaxed optimality conditions at
X = mu*I + U U^T, S = C - A^T(y) is

    F1 = A(X) - b                (length m)
    F2 = X S - mu*I              (n x n, deliberately not symmetrized)

with merit phi = (||F1||^2 + ||F2||_F^2) / 2. The Jacobian splits into
blocks J11 = A Q, J21 = (S kron I) Q, J22 = -(I kron X) A^T with
Q = (U kron I) + (I kron U) Pi. Every product below is evaluated through
thin matrices (n x r) and the constraint pattern; S is applied twice where
S^2 appears and is never squared explicitly. F2 itself carries the
structured form F2 = U W + mu*(S - I), W = U^T S, which the fused routines
exploit so that no n x n dense object is formed outside the operations
whose contract hands one over.
"""

from __future__ import annotations

import numpy as np

from . import linop
from .linalg import mat, vec
from .problem import SdpProblem


class IterateContext:
    """Frozen evaluation point (U, y, mu) with cached S-dependent products.

    The dual slack S = C - A^T(y) is rebuilt whenever y changes; U-only
    updates reuse it. All cached quantities are derived, so instances are
    safe to share across concurrent product evaluations.
    """

    def __init__(self, problem: SdpProblem, U: np.ndarray, y: np.ndarray,
                 mu: float, _S=None):
        if mu <= 0:
            raise ValueError("mu must be positive")
        self.problem = problem
        self.U = np.asarray(U, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.mu = float(mu)
        self.n, self.r = self.U.shape
        self.m = problem.m
        self.S = linop.dual_slack(problem, self.y) if _S is None else _S
        self._cache: dict = {}

    _S_KEYS = ("S_coo", "S_pat")
    _U_KEYS = ("U_rows", "U_cols", "GU")

    def with_U(self, U: np.ndarray) -> "IterateContext":
        ctx = IterateContext(self.problem, U, self.y, self.mu, _S=self.S)
        for key in self._S_KEYS:             # S unchanged, keep its gathers
            if key in self._cache:
                ctx._cache[key] = self._cache[key]
        return ctx

    def with_y(self, y: np.ndarray) -> "IterateContext":
        ctx = IterateContext(self.problem, self.U, y, self.mu)
        for key in self._U_KEYS:             # U unchanged, keep its gathers
            if key in self._cache:
                ctx._cache[key] = self._cache[key]
        return ctx

    # -- cached products -------------------------------------------------
    def _get(self, key, builder):
        val = self._cache.get(key)
        if val is None:
            val = builder()
            self._cache[key] = val
        return val

    @property
    def SU(self) -> np.ndarray:          # S U, (n, r)
        return self._get("SU", lambda: self.S @ self.U)

    @property
    def SSU(self) -> np.ndarray:         # S (S U), (n, r)
        return self._get("SSU", lambda: self.S @ self.SU)

    @property
    def W(self) -> np.ndarray:           # U^T S, (r, n)
        return self._get("W", lambda: self.SU.T.copy())

    @property
    def GU(self) -> np.ndarray:          # U^T U, (r, r)
        return self._get("GU", lambda: self.U.T @ self.U)

    @property
    def UtSSU(self) -> np.ndarray:       # U^T S S U, (r, r)
        return self._get("UtSSU", lambda: self.U.T @ self.SSU)

    @property
    def U_rows(self) -> np.ndarray:      # U gathered at pattern rows
        rows, _, _, _ = linop.pattern(self.problem)
        return self._get("U_rows", lambda: self.U[rows])

    @property
    def U_cols(self) -> np.ndarray:      # U gathered at pattern cols
        _, cols, _, _ = linop.pattern(self.problem)
        return self._get("U_cols", lambda: self.U[cols])

    @property
    def S_pat(self) -> np.ndarray:       # S values at pattern positions
        def build():
            rows, cols, _, _ = linop.pattern(self.problem)
            return np.asarray(self.S[rows, cols]).ravel()
        return self._get("S_pat", build)

    @property
    def F1(self) -> np.ndarray:
        return self._get(
            "F1",
            lambda: linop.apply_A_lowrank(self.problem, self.U, self.mu)
            - self.problem.b,
        )


def _rowdot(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", A, B)


def residuals(ctx: IterateContext):
    """(F1, F2, phi) with F2 materialized densely; prefer residual_norms in loops."""
    F1 = ctx.F1
    F2 = ctx.U @ ctx.W
    F2 += ctx.mu * ctx.S.toarray()
    F2[np.diag_indices(ctx.n)] -= ctx.mu
    phi = 0.5 * (F1 @ F1 + np.sum(F2 * F2))
    return F1, F2, phi


def residual_norms(ctx: IterateContext):
    """(||F1||^2, ||F2||_F^2, phi) from the structured F2, no n x n dense."""
    F1 = ctx.F1
    f1_sq = float(F1 @ F1)
    S, U, W, mu = ctx.S, ctx.U, ctx.W, ctx.mu
    # ||U W||^2 = trace((U^T U)(W W^T))
    uw_sq = float(np.sum(ctx.GU * (W @ W.T)))
    # <U W, S - I> = sum_{pq in S} S_pq (U W)_pq - trace(U W)
    Sc = ctx._get("S_coo", lambda: S.tocoo())
    uw_at_s = _rowdot(U[Sc.row], W[:, Sc.col].T)
    cross = float(Sc.data @ uw_at_s) - float(np.einsum("ij,ji->", U, W))
    # ||S - I||^2 = ||S||^2 - 2 tr(S) + n
    s_sq = float(S.data @ S.data) - 2.0 * float(S.diagonal().sum()) + ctx.n
    f2_sq = uw_sq + 2.0 * mu * cross + mu * mu * s_sq
    phi = 0.5 * (f1_sq + f2_sq)
    return f1_sq, f2_sq, phi


# -- block products ------------------------------------------------------

def j11_apply(ctx: IterateContext, v: np.ndarray) -> np.ndarray:
    """J11 v = A(mat(v) U^T + U mat(v)^T), touching only pattern entries."""
    Vm = mat(v, ctx.n, ctx.r)
    rows, cols, _, _ = linop.pattern(ctx.problem)
    ev = _rowdot(Vm[rows], ctx.U_cols) + _rowdot(ctx.U_rows, Vm[cols])
    return linop.contract_values(ctx.problem, ev)


def _at_times(ctx: IterateContext, w: np.ndarray) -> np.ndarray:
    """(A^T w) U without materializing A^T w."""
    return linop.at_product(ctx.problem, w, ctx.U, U_cols=ctx.U_cols)


def j11t_apply(ctx: IterateContext, w: np.ndarray) -> np.ndarray:
    """J11^T w = 2 vec((A^T w) U)."""
    if len(w) != ctx.m:
        raise ValueError(f"expected length {ctx.m}, got {len(w)}")
    return 2.0 * vec(_at_times(ctx, w))


def j21t_apply(ctx: IterateContext, Z: np.ndarray) -> np.ndarray:
    """J21^T vec(Z) = vec(Z S U + S Z^T U) for an explicit n x n matrix Z."""
    return vec(Z @ ctx.SU + ctx.S @ (Z.T @ ctx.U))


def j21t_j21_apply(ctx: IterateContext, v: np.ndarray) -> np.ndarray:
    """J21^T J21 v = vec(V S^2 U + S^2 V U), V = mat(v) U^T + U mat(v)^T.

    S is applied twice (S^2 is never formed) and V enters only through thin
    products, so the cost is O(nnz(S) r + n r^2).
    """
    Vm = mat(v, ctx.n, ctx.r)
    # V (S^2 U) = Vm (U^T S^2 U) + U (Vm^T S^2 U)
    t1 = Vm @ ctx.UtSSU + ctx.U @ (Vm.T @ ctx.SSU)
    # S^2 (V U) with V U = Vm (U^T U) + U (Vm^T U)
    VU = Vm @ ctx.GU + ctx.U @ (Vm.T @ ctx.U)
    t2 = ctx.S @ (ctx.S @ VU)
    return vec(t1 + t2)


def j22_apply(ctx: IterateContext, w: np.ndarray) -> np.ndarray:
    """J22 w = -X (A^T w) as an n x n matrix, X applied as mu*M + U(U^T M)."""
    M = linop.apply_AT(ctx.problem, w)
    UtM = (M @ ctx.U).T
    out = ctx.U @ UtM
    out += ctx.mu * M.toarray()
    return -out


def j22t_apply(ctx: IterateContext, Z: np.ndarray) -> np.ndarray:
    """J22^T vec(Z) = -(A_i . X Z)_i, sampling X Z only at the pattern."""
    rows, cols, _, _ = linop.pattern(ctx.problem)
    What = ctx.U.T @ Z
    ev = ctx.mu * Z[rows, cols] + _rowdot(ctx.U_rows, What[:, cols].T)
    return -linop.contract_values(ctx.problem, ev)


# -- fused composites ----------------------------------------------------

def normal_u_apply(ctx: IterateContext, v: np.ndarray) -> np.ndarray:
    """(J11^T J11 + J21^T J21) v, the operator of the U-step normal system."""
    w = j11_apply(ctx, v)
    return 2.0 * vec(_at_times(ctx, w)) + j21t_j21_apply(ctx, v)


def normal_y_apply(ctx: IterateContext, w: np.ndarray) -> np.ndarray:
    """J22^T J22 w = A(I kron X^2)A^T w without any n x n intermediate.

    X^2 M = mu^2 M + U (2 mu I + U^T U)(U^T M), so the product reduces to the
    Gram action plus one pattern contraction of a rank-r matrix.
    """
    UtM = _at_times(ctx, w).T            # U^T (A^T w), using A^T w symmetric
    K = (2.0 * ctx.mu) * UtM + ctx.GU @ UtM
    rows, cols, _, _ = linop.pattern(ctx.problem)
    ev = _rowdot(ctx.U_rows, K[:, cols].T)
    out = linop.contract_values(ctx.problem, ev)
    out += (ctx.mu ** 2) * linop.apply_AAt(ctx.problem, w)
    return out


def grad_phi(ctx: IterateContext):
    """Gradient of phi as (G_U, g_y, norm).

    vec(G_U) = J11^T F1 + J21^T vec(F2) and g_y = J22^T vec(F2), assembled
    from the structured F2 = U W + mu*(S - I); norm is the Euclidean norm of
    the stacked gradient, the criticality measure of the outer loop.
    """
    U, S, W, mu = ctx.U, ctx.S, ctx.W, ctx.mu
    G_U = 2.0 * _at_times(ctx, ctx.F1)
    # J21^T F2 = F2 S U + S F2^T U
    G_U += U @ (W @ ctx.SU) + S @ (W.T @ ctx.GU)
    G_U += (2.0 * mu) * (ctx.SSU - ctx.SU)
    # g_y = -(A_i . X F2), X F2 sampled at the pattern
    rows, cols, _, _ = linop.pattern(ctx.problem)
    dm = linop.diag_mask(ctx.problem)
    H = ctx.GU @ W + mu * W - mu * U.T          # U^T F2, (r, n)
    f2_pat = _rowdot(ctx.U_rows, W[:, cols].T) + mu * (ctx.S_pat - dm)
    ev = mu * f2_pat + _rowdot(ctx.U_rows, H[:, cols].T)
    g_y = -linop.contract_values(ctx.problem, ev)
    norm = float(np.sqrt(np.sum(G_U * G_U) + g_y @ g_y))
    return G_U, g_y, norm
