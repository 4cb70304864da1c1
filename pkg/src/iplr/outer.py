"""Outer relaxed interior-point loop: inner solve, dual backtracking, rank
adaptation, barrier schedule, termination, and the per-iteration report.

Each iteration solves the barrier least-squares subproblem to gradient
tolerance eta2 * mu_k, backtracks the dual step until S = C - A^T(y) stays
positive definite (dual feasibility holds by construction throughout), and
then either terminates (mu_k < epsilon, returning X_k = U_k U_k^T + mu_k I),
or consults the infeasibility-decrease ratio rho_k to grow or shrink the
rank. mu is reduced by sigma only on iterations without a rank event. After
a downdate, rank updates stay inhibited for the rest of the solve.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import jacobian, linop
from .inner import InnerConfig, InnerStats, solve_subproblem
from .linalg import try_cholesky
from .problem import DualState, LowRankPrimal, SdpProblem


@dataclass
class SolverConfig:
    mu0: float = 1.0
    sigma: float = 0.5
    eta1: float = 0.9
    eta2: float | None = None            # defaults to sqrt(n) at solve time
    epsilon: float = 1e-4
    rank: int = 1
    delta_rank: int = 1
    inner: InnerConfig = field(default_factory=InnerConfig)
    backtrack_factor: float = 0.5
    backtrack_cap: int = 60
    alpha_min: float = 1e-16
    seed: int = 0
    y0: np.ndarray | None = None
    U0: np.ndarray | None = None

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not self.sigma < self.eta1 < 1:
            raise ValueError("eta1 must lie in (sigma, 1)")
        if self.epsilon <= 0 or self.mu0 <= 0:
            raise ValueError("epsilon and mu0 must be positive")
        if self.rank < 1 or self.delta_rank < 1:
            raise ValueError("rank and delta_rank must be >= 1")


@dataclass
class RankState:
    """State machine of the rank updating/downdating strategy.

    update_r records the previous iteration's action; once a downdate fires,
    `inhibited` disables rank changes for all subsequent iterations.
    """

    r: int
    delta_r: int
    update_r: str = "unch"               # "unch" | "up" | "down"
    inhibited: bool = False


def rank_adapt(state: RankState, rho: float, eta1: float, U: np.ndarray,
               dual: DualState, stash):
    """Apply the ratio test; returns (U, dual, y_warm, event).

    rho > eta1 from an unchanged state appends canonical basis columns
    e_{r+1}..e_{r+delta_r} to U (rank up, mu frozen by the caller); a second
    consecutive failure restores the stashed previous iterate at the old
    rank and inhibits all future updates. y_warm is the inner warm-start
    vector, replaced only on a downdate.
    """
    if state.inhibited or rho <= eta1:
        state.update_r = "unch"
        return U, dual, None, "unch"
    if state.update_r == "up":
        state.r -= state.delta_r
        state.update_r = "down"
        state.inhibited = True
        U_prev, dual_prev, y_warm_prev = stash
        return U_prev[:, :state.r].copy(), dual_prev, y_warm_prev, "down"
    n = U.shape[0]
    old_r = state.r
    state.r += state.delta_r
    if state.r > n:
        raise RuntimeError("rank update would exceed the matrix order")
    state.update_r = "up"
    cols = np.zeros((n, state.delta_r))
    cols[np.arange(old_r, state.r), np.arange(state.delta_r)] = 1.0
    return np.hstack([U, cols]), dual, None, "up"


def dual_backtrack(problem: SdpProblem, y_prev: np.ndarray,
                   chol_prev: np.ndarray, ybar: np.ndarray,
                   factor: float = 0.5, cap: int = 60,
                   alpha_min: float = 1e-16):
    """Largest tried alpha in (0, 1] with S(y_prev + alpha*(ybar - y_prev)) pd.

    alpha = 1 is accepted without retries when C - A^T(ybar) already
    factorizes; otherwise alpha is halved until the Cholesky probe succeeds.
    A positive alpha exists whenever S(y_prev) is positive definite, so
    underflow indicates corrupted state and raises.
    """
    S_bar = linop.dual_slack(problem, ybar).toarray()
    L = try_cholesky(S_bar)
    if L is not None:
        return 1.0, DualState(y=np.asarray(ybar, dtype=float).copy(), chol=L)
    dy = np.asarray(ybar) - np.asarray(y_prev)
    alpha = 1.0
    for _ in range(cap):
        alpha *= factor
        if alpha < alpha_min:
            break
        y_trial = y_prev + alpha * dy
        L = try_cholesky(linop.dual_slack(problem, y_trial).toarray())
        if L is not None:
            return alpha, DualState(y=y_trial, chol=L)
    raise RuntimeError(
        "dual backtracking underflow: no positive-definite slack found above "
        f"alpha={alpha_min}"
    )


@dataclass
class IterationRecord:
    k: int
    mu: float
    rank: int
    primal_infeasibility: float
    centrality: float
    lambda_min_S: float
    alpha: float
    grad_norm: float
    rho: float | None
    rank_event: str
    primal_infeasibility_end: float
    inner: dict


@dataclass
class SolveReport:
    iterations: list[IterationRecord]
    final_primal: LowRankPrimal
    final_dual: DualState
    termination: str
    config: SolverConfig
    eta2: float

    @property
    def outer_iterations(self) -> int:
        return len(self.iterations)

    @property
    def terminated_cleanly(self) -> bool:
        return self.termination == "mu_below_epsilon"


def _inner_stats_dict(st: InnerStats) -> dict:
    return {
        "method": st.method,
        "converged": bool(st.converged),
        "grad_norm": float(st.grad_norm),
        "sweeps": int(st.sweeps),
        "cg_u_iters": [int(i) for i in st.cg_u_iters],
        "cg_y_iters": [int(i) for i in st.cg_y_iters],
        "precond_inner_iters": int(st.precond_inner_iters),
        "bb_iterations": int(st.bb_iterations),
        "bb_backtracks": int(st.bb_backtracks),
        "failed": bool(st.failed),
    }


def _lambda_min_estimate(chol: np.ndarray, rng: np.random.Generator,
                         steps: int = 5) -> float:
    """Inverse power iteration through the Cholesky factor (estimate only)."""
    n = chol.shape[0]
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    growth = 1.0
    for _ in range(steps):
        w = scipy.linalg.cho_solve((chol, True), v)
        growth = np.linalg.norm(w)
        v = w / growth
    return float(1.0 / growth)


def iteration_cap(cfg: SolverConfig, n: int) -> int:
    """Deterministic bound: barrier schedule length plus rank-event slack."""
    cuts = max(1, math.ceil(math.log(cfg.epsilon / cfg.mu0) / math.log(cfg.sigma)))
    max_updates = math.ceil((n - cfg.rank) / cfg.delta_rank)
    return cuts + 3 * max_updates + 10


def iplr_solve(problem: SdpProblem, cfg: SolverConfig) -> SolveReport:
    """Run the relaxed interior-point loop on a low-rank SDP.

    The initial point is y0 = 0 (requiring C positive definite, which holds
    for matrix-completion problems where C = I/2) and U0 = the first `rank`
    columns of the identity; both can be overridden through the config.
    """
    n, m = problem.n, problem.m
    eta2 = cfg.eta2 if cfg.eta2 is not None else math.sqrt(n)
    rng = np.random.default_rng(cfg.seed)

    if cfg.U0 is not None:
        U = np.array(cfg.U0, dtype=float)
        if U.shape != (n, cfg.rank):
            raise ValueError(f"U0 must have shape {(n, cfg.rank)}")
    else:
        U = np.eye(n, cfg.rank)
    y = np.zeros(m) if cfg.y0 is None else np.array(cfg.y0, dtype=float)
    L0 = try_cholesky(linop.dual_slack(problem, y).toarray())
    if L0 is None:
        raise ValueError(
            "initial dual slack C - A^T(y0) is not positive definite; "
            "supply a strictly dual-feasible y0"
        )
    dual = DualState(y=y, chol=L0)

    mu = cfg.sigma * cfg.mu0           # mu_1; mu_0 parametrizes the initial point
    prev_infeas = float(np.linalg.norm(
        linop.apply_A_lowrank(problem, U, cfg.mu0) - problem.b))
    state = RankState(r=U.shape[1], delta_r=cfg.delta_rank)
    stash = (U.copy(), dual, y.copy())
    # The subproblem is warm-started from the previous approximate minimizer
    # (U, ybar), not from the backtracked dual: backtracking exists to keep
    # the reported (y_k, S_k) strictly feasible, while restarting the
    # minimization halfway back toward the old dual discards inner progress
    # and can strand the iterate off the central path.
    y_warm = y.copy()
    sweeps_cap = cfg.inner.gs_max_sweeps
    consecutive_failures = 0
    records: list[IterationRecord] = []
    termination = "iteration_cap"

    for k in range(1, iteration_cap(cfg, n) + 1):
        U_new, ybar, istats = solve_subproblem(
            problem, U, y_warm, mu, eta2, cfg.inner, max_sweeps=sweeps_cap)
        consecutive_failures = consecutive_failures + 1 if istats.failed else 0

        alpha, dual = dual_backtrack(
            problem, dual.y, dual.chol, ybar,
            factor=cfg.backtrack_factor, cap=cfg.backtrack_cap,
            alpha_min=cfg.alpha_min)
        U = U_new
        y_warm = ybar

        ctx = jacobian.IterateContext(problem, U, dual.y, mu)
        infeas = float(np.linalg.norm(ctx.F1))
        _, f2_sq, _ = jacobian.residual_norms(ctx)
        centrality = float(math.sqrt(max(f2_sq, 0.0)))
        _, _, gnorm = jacobian.grad_phi(ctx)
        lam_min = _lambda_min_estimate(dual.chol, rng)

        if mu < cfg.epsilon:
            records.append(IterationRecord(
                k=k, mu=mu, rank=U.shape[1], primal_infeasibility=infeas,
                centrality=centrality, lambda_min_S=lam_min, alpha=alpha,
                grad_norm=istats.grad_norm, rho=None, rank_event="unch",
                primal_infeasibility_end=infeas,
                inner=_inner_stats_dict(istats)))
            termination = "mu_below_epsilon"
            break

        rho = 0.0 if prev_infeas < 1e-15 else infeas / prev_infeas
        # The ratio test presumes the inner solve met its stopping rule; a
        # capped-out inner stalls the infeasibility for reasons unrelated to
        # the rank, so rank adaptation is suppressed in that case.
        if istats.converged:
            U, dual, y_restored, event = rank_adapt(
                state, rho, cfg.eta1, U, dual, stash)
            if y_restored is not None:
                y_warm = y_restored
        else:
            state.update_r = "unch"
            event = "unch"
        if event == "up" and sweeps_cap == cfg.inner.gs_max_sweeps:
            sweeps_cap = cfg.inner.gs_max_sweeps_escalated
        if event == "unch":
            infeas_end = infeas
        else:
            infeas_end = float(np.linalg.norm(
                linop.apply_A_lowrank(problem, U, mu) - problem.b))

        records.append(IterationRecord(
            k=k, mu=mu, rank=U_new.shape[1], primal_infeasibility=infeas,
            centrality=centrality, lambda_min_S=lam_min, alpha=alpha,
            grad_norm=istats.grad_norm, rho=rho, rank_event=event,
            primal_infeasibility_end=infeas_end,
            inner=_inner_stats_dict(istats)))

        if consecutive_failures >= 2:
            termination = "inner_failure"
            break

        prev_infeas = infeas
        stash = (U.copy(), dual, np.array(y_warm))
        if state.update_r == "unch":
            mu = cfg.sigma * mu

    return SolveReport(
        iterations=records,
        final_primal=LowRankPrimal(U=U, mu=mu),
        final_dual=dual,
        termination=termination,
        config=cfg,
        eta2=eta2,
    )


def report_to_dict(report: SolveReport, problem: SdpProblem) -> dict:
    """JSON-ready dictionary for a solve report (schema lives in the CLI)."""
    cfg = report.config
    inner = cfg.inner
    primal = report.final_primal
    # objective C . X for X = mu*I + U U^T, computed through the sparse C
    C = problem.C
    CU = C @ primal.U
    objective = float(primal.mu * C.diagonal().sum()
                      + np.sum(primal.U * CU))
    final_infeas = float(np.linalg.norm(
        linop.apply_A_lowrank(problem, primal.U, primal.mu) - problem.b))
    return {
        "schema_version": 1,
        "problem": {
            "n": problem.n,
            "m": problem.m,
            "nhat": problem.nhat,
            "operator": "completion" if problem.nhat is not None else "general",
        },
        "solver": {
            "mu0": cfg.mu0, "sigma": cfg.sigma, "eta1": cfg.eta1,
            "eta2": report.eta2, "epsilon": cfg.epsilon,
            "initial_rank": cfg.rank, "delta_rank": cfg.delta_rank,
            "seed": cfg.seed,
            "inner": {k: v for k, v in asdict(inner).items()},
        },
        "iterations": [
            {
                "k": rec.k, "mu": rec.mu, "rank": rec.rank,
                "primal_infeasibility": rec.primal_infeasibility,
                "centrality": rec.centrality,
                "lambda_min_S": rec.lambda_min_S,
                "alpha": rec.alpha, "grad_norm": rec.grad_norm,
                "rho": rec.rho, "rank_event": rec.rank_event,
                "primal_infeasibility_end": rec.primal_infeasibility_end,
                "inner": rec.inner,
            }
            for rec in report.iterations
        ],
        "termination": {
            "reason": report.termination,
            "outer_iterations": report.outer_iterations,
        },
        "final": {
            "mu": primal.mu,
            "rank": primal.r,
            "objective": objective,
            "primal_infeasibility": final_infeas,
        },
    }
