"""Inner minimizers for the barrier least-squares subproblem.

Two strategies compute an approximate minimizer of phi_mu(U, y): a nonlinear
Gauss-Seidel scheme alternating Gauss-Newton steps in U and y (each step a
CG solve over the matrix-free normal operators), and a Barzilai-Borwein
gradient method with a nonmonotone Armijo line search on the stacked
variable (vec(U); y).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import jacobian, precond
from .jacobian import IterateContext
from .krylov import cg
from .linalg import mat, vec
from .problem import SdpProblem


@dataclass
class InnerConfig:
    """Inner-solver knobs.

    The Gauss-Seidel sweep cap defaults to 100: at the problem sizes this
    package targets, the gradient target eta2*mu demands tens of sweeps per
    barrier value (more on the cold start and after dual backtracking), and
    capping lower makes the iterate fall off the central path and stall the
    infeasibility decrease. Sweeps stop early at the gradient target, so
    the cap only bites where it is needed. Set gs_max_sweeps=5 to reproduce
    the tighter budget used in the original large-scale experiments.
    """

    method: str = "gs"                   # "gs" or "bb"
    gs_max_sweeps: int = 100
    gs_max_sweeps_escalated: int = 200   # used after a rank-up event
    cg_tol: float = 1e-6
    cg_maxit: int = 100
    use_preconditioner: bool = True
    precond_tol: float = 1e-8
    precond_maxit: int = 100
    bb_maxit: int = 300
    bb_grad_cap: float = 1e-3            # stop at ||grad|| <= min(cap, mu)
    bb_memory: int = 10
    bb_armijo: float = 1e-4
    bb_backtrack: float = 0.5
    bb_max_backtracks: int = 30
    bb_step_min: float = 1e-10
    bb_step_max: float = 1e10
    bb_initial_step: float = 1.0

    def __post_init__(self):
        if self.method not in ("gs", "bb"):
            raise ValueError("inner method must be 'gs' or 'bb'")
        for name in ("cg_tol", "precond_tol", "bb_armijo", "bb_backtrack",
                     "bb_step_min", "bb_step_max", "bb_initial_step", "bb_grad_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class InnerStats:
    method: str
    converged: bool
    grad_norm: float
    sweeps: int = 0
    cg_u_iters: list = field(default_factory=list)
    cg_y_iters: list = field(default_factory=list)
    precond_inner_iters: int = 0
    bb_iterations: int = 0
    bb_backtracks: int = 0
    breakdown: bool = False
    failed: bool = False


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite residual encountered in inner solve")


def gauss_seidel(problem: SdpProblem, U0: np.ndarray, y0: np.ndarray, mu: float,
                 eta2: float, cfg: InnerConfig, max_sweeps: int | None = None):
    """Alternating Gauss-Newton sweeps until ||grad phi_mu|| <= eta2 * mu.

    Each sweep solves the U-step normal system with unpreconditioned CG,
    updates U, recomputes the centrality residual, then solves the dual
    normal system (optionally through the Schur-complement preconditioner)
    and updates y. Returns (U, ybar, stats); a CG breakdown aborts the sweep
    and flags the result without raising.
    """
    if max_sweeps is None:
        max_sweeps = cfg.gs_max_sweeps
    ctx = IterateContext(problem, U0, y0, mu)
    target = eta2 * mu
    G_U, _, gnorm = jacobian.grad_phi(ctx)
    stats = InnerStats(method="gs", converged=gnorm <= target, grad_norm=gnorm)
    if stats.converged:
        return ctx.U, ctx.y, stats

    for sweep in range(1, max_sweeps + 1):
        stats.sweeps = sweep
        rhs_u = -vec(G_U)
        _check_finite(rhs_u)
        dU, st_u = cg(lambda v: jacobian.normal_u_apply(ctx, v), rhs_u,
                      tol=cfg.cg_tol, maxit=cfg.cg_maxit)
        stats.cg_u_iters.append(st_u.iterations)
        if st_u.breakdown:
            stats.breakdown = True
            stats.failed = True
            break
        ctx = ctx.with_U(ctx.U + mat(dU, ctx.n, ctx.r))

        _, g_y, _ = jacobian.grad_phi(ctx)
        rhs_y = -g_y
        _check_finite(rhs_y)
        pc = None
        if cfg.use_preconditioner:
            pc = precond.build_preconditioner(problem, ctx.U, mu,
                                              tol=cfg.precond_tol,
                                              maxit=cfg.precond_maxit)
        dy, st_y = cg(lambda w: jacobian.normal_y_apply(ctx, w), rhs_y,
                      tol=cfg.cg_tol, maxit=cfg.cg_maxit, precond=pc)
        stats.cg_y_iters.append(st_y.iterations)
        if pc is not None:
            stats.precond_inner_iters += pc.inner_iterations
        if st_y.breakdown:
            stats.breakdown = True
            stats.failed = True
            break
        ctx = ctx.with_y(ctx.y + dy)

        G_U, _, gnorm = jacobian.grad_phi(ctx)
        stats.grad_norm = gnorm
        if gnorm <= target:
            stats.converged = True
            break

    return ctx.U, ctx.y, stats


def bb_minimize(problem: SdpProblem, U0: np.ndarray, y0: np.ndarray, mu: float,
                cfg: InnerConfig):
    """Barzilai-Borwein descent on (vec(U); y) with nonmonotone line search.

    Step lengths follow the BB1 rule s.s / s.(g - g_prev), safeguarded to
    [bb_step_min, bb_step_max]; acceptance compares against the maximum of
    the last bb_memory merit values (Armijo parameter bb_armijo, halving
    backtracks). Stops at ||grad|| <= min(bb_grad_cap, mu) or bb_maxit.
    """
    ctx = IterateContext(problem, U0, y0, mu)
    stop_tol = min(cfg.bb_grad_cap, mu)
    G_U, g_y, gnorm = jacobian.grad_phi(ctx)
    _, _, phi = jacobian.residual_norms(ctx)
    _check_finite([phi, gnorm])
    stats = InnerStats(method="bb", converged=gnorm <= stop_tol, grad_norm=gnorm)
    if stats.converged:
        return ctx.U, ctx.y, stats

    window: deque = deque([phi], maxlen=cfg.bb_memory)
    step = cfg.bb_initial_step

    for it in range(1, cfg.bb_maxit + 1):
        stats.bb_iterations = it
        f_ref = max(window)
        gnorm_sq = gnorm * gnorm
        t = step
        accepted = False
        for _ in range(cfg.bb_max_backtracks + 1):
            trial = IterateContext(problem, ctx.U - t * G_U, ctx.y - t * g_y, mu)
            _, _, phi_t = jacobian.residual_norms(trial)
            if np.isfinite(phi_t) and phi_t <= f_ref - cfg.bb_armijo * t * gnorm_sq:
                accepted = True
                break
            t *= cfg.bb_backtrack
            stats.bb_backtracks += 1
        if not accepted:
            stats.failed = True
            break

        G_U2, g_y2, gnorm2 = jacobian.grad_phi(trial)
        # BB1 step from s = -t*g: s.s = t^2 |g|^2, s.(g2 - g) = t(|g|^2 - g.g2)
        g_dot_g2 = float(np.sum(G_U * G_U2) + g_y @ g_y2)
        s_dot_dg = t * (gnorm_sq - g_dot_g2)
        if s_dot_dg > 0:
            step = (t * t * gnorm_sq) / s_dot_dg
        else:
            step = cfg.bb_step_max
        step = min(max(step, cfg.bb_step_min), cfg.bb_step_max)

        ctx, G_U, g_y, gnorm = trial, G_U2, g_y2, gnorm2
        window.append(phi_t)
        stats.grad_norm = gnorm
        if gnorm <= stop_tol:
            stats.converged = True
            break

    return ctx.U, ctx.y, stats


def solve_subproblem(problem: SdpProblem, U0: np.ndarray, y0: np.ndarray,
                     mu: float, eta2: float, cfg: InnerConfig,
                     max_sweeps: int | None = None):
    if cfg.method == "gs":
        return gauss_seidel(problem, U0, y0, mu, eta2, cfg, max_sweeps=max_sweeps)
    return bb_minimize(problem, U0, y0, mu, cfg)
