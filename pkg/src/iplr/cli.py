"""Command-line front end: generate instances, solve, and evaluate recoveries.

Every flag's default can be overridden through an environment variable named
IPLR_<FLAG> (upper case, dashes replaced by underscores), e.g.
IPLR_EPSILON=1e-2. Explicit command-line flags always win.

Exit codes: 0 on a clean solve (mu fell below epsilon), 1 on malformed input
files, 2 on solver abort or usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import matcomp, problem as prob
from .fileio import (
    CsvFormatError,
    read_dense_csv,
    read_entries_csv,
    write_dense_csv,
    write_entries_csv,
)
from .inner import InnerConfig
from .outer import SolverConfig, iplr_solve, report_to_dict
from .problem import extract_recovered

MANIFEST_SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["schema_version", "problem", "solver", "iterations",
                 "termination", "final"],
    "properties": {
        "schema_version": {"const": 1},
        "problem": {
            "type": "object",
            "required": ["n", "m", "nhat", "operator"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "nhat": {"type": ["integer", "null"]},
                "operator": {"enum": ["completion", "general"]},
            },
        },
        "solver": {
            "type": "object",
            "required": ["mu0", "sigma", "eta1", "eta2", "epsilon",
                         "initial_rank", "delta_rank", "inner"],
        },
        "iterations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "mu", "rank", "primal_infeasibility",
                             "centrality", "lambda_min_S", "alpha",
                             "grad_norm", "rho", "rank_event",
                             "primal_infeasibility_end", "inner"],
                "properties": {
                    "k": {"type": "integer", "minimum": 1},
                    "mu": {"type": "number", "exclusiveMinimum": 0},
                    "rank": {"type": "integer", "minimum": 1},
                    "primal_infeasibility": {"type": "number", "minimum": 0},
                    "centrality": {"type": "number", "minimum": 0},
                    "lambda_min_S": {"type": "number"},
                    "alpha": {"type": "number", "exclusiveMinimum": 0,
                              "maximum": 1},
                    "grad_norm": {"type": "number", "minimum": 0},
                    "rho": {"type": ["number", "null"]},
                    "rank_event": {"enum": ["unch", "up", "down"]},
                    "primal_infeasibility_end": {"type": "number", "minimum": 0},
                    "inner": {"type": "object"},
                },
            },
        },
        "termination": {
            "type": "object",
            "required": ["reason", "outer_iterations"],
            "properties": {
                "reason": {"enum": ["mu_below_epsilon", "iteration_cap",
                                    "inner_failure"]},
                "outer_iterations": {"type": "integer", "minimum": 0},
            },
        },
        "final": {
            "type": "object",
            "required": ["mu", "rank", "objective", "primal_infeasibility"],
        },
        "runtime_seconds": {"type": "number"},
    },
}


def _env(flag: str, fallback, cast=str):
    key = "IPLR_" + flag.lstrip("-").upper().replace("-", "_")
    raw = os.environ.get(key)
    if raw is None:
        return fallback
    if cast is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return cast(raw)


def _dump_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


# -- generate --------------------------------------------------------------

def print_usage_error(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def cmd_generate(args) -> int:
    nhat, rank = args.nhat, args.rank
    if rank < 1 or rank > nhat:
        print_usage_error(f"--rank must lie in [1, nhat]; got {rank} with nhat={nhat}")
        return 2
    m = args.m if args.m is not None else prob.default_sample_count(nhat, rank)
    if m > nhat * nhat:
        print_usage_error(f"--m {m} exceeds nhat^2 = {nhat * nhat}")
        return 2

    if args.kappa is not None:
        gt = prob.generate_conditioned(nhat, rank, args.kappa, args.seed)
    else:
        gt = prob.generate_random_lowrank(nhat, rank, args.seed)
    if args.xi is not None and args.xi > 0:
        gt = prob.perturb_singular_values(gt, args.xi, args.seed + 1)

    pairs = prob.sample_omega(nhat, m, args.seed + 2)
    values = gt.B[pairs[:, 0], pairs[:, 1]]
    values = prob.add_noise(values, args.noise, args.seed + 3)

    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.join(args.out_dir, args.prefix)
    truth_path = base + "_truth.csv"
    entries_path = base + "_entries.csv"
    manifest_path = base + "_manifest.json"
    write_dense_csv(truth_path, gt.B)
    write_entries_csv(entries_path,
                      [(int(s), int(t), float(v))
                       for (s, t), v in zip(pairs, values)])
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "generator": gt.info.get("generator", "lowrank"),
        "seed": args.seed,
        "nhat": nhat,
        "rank": rank,
        "m": int(m),
        "noise": args.noise,
        "kappa": args.kappa,
        "xi": args.xi,
        "epsilon_hint": max(1e-4, 0.1 * args.noise),
        "files": {
            "truth": os.path.basename(truth_path),
            "entries": os.path.basename(entries_path),
        },
    }
    _dump_json(manifest, manifest_path)
    print(f"wrote {entries_path} ({m} entries), {truth_path}, {manifest_path}")
    return 0


# -- solve -----------------------------------------------------------------

def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    entries, max_idx = read_entries_csv(args.entries)
    nhat = args.nhat if args.nhat is not None else max_idx
    if max_idx > nhat:
        print_usage_error(f"entries reference index {max_idx} > nhat={nhat}")
        return 1
    sdp = prob.build_mc_problem(entries, nhat)

    inner = InnerConfig(
        method=args.inner,
        gs_max_sweeps=args.gs_sweeps,
        gs_max_sweeps_escalated=2 * args.gs_sweeps,
        cg_tol=args.cg_tol,
        cg_maxit=args.cg_maxit,
        use_preconditioner=(args.precond == "schur"),
        bb_maxit=args.bb_maxit,
    )
    eta2 = args.eta2 if args.eta2 is not None else math.sqrt(sdp.n)
    cfg = SolverConfig(
        mu0=args.mu0, sigma=args.sigma, eta1=args.eta1, eta2=eta2,
        epsilon=args.epsilon, rank=args.rank, delta_rank=args.delta_rank,
        inner=inner, seed=args.seed,
    )
    report = iplr_solve(sdp, cfg)
    runtime = time.perf_counter() - t0

    payload = report_to_dict(report, sdp)
    if not args.deterministic:
        payload["runtime_seconds"] = runtime

    stem, _ = os.path.splitext(args.entries)
    report_path = args.report or (stem + "_report.json")
    factor_path = args.factor_out or (stem + "_factor.csv")
    _dump_json(payload, report_path)
    write_dense_csv(factor_path, report.final_primal.U)
    if args.emit_dense:
        write_dense_csv(args.emit_dense,
                        extract_recovered(report.final_primal.U, nhat))

    ok = report.terminated_cleanly
    print(f"{report.termination}: {report.outer_iterations} iterations, "
          f"final mu={report.final_primal.mu:.3e}, rank={report.final_primal.r}, "
          f"report={report_path}")
    return 0 if ok else 2


# -- evaluate ---------------------------------------------------------------

def cmd_evaluate(args) -> int:
    truth = read_dense_csv(args.truth)
    if args.recovered is not None:
        X = read_dense_csv(args.recovered)
    else:
        U = read_dense_csv(args.factor)
        X = extract_recovered(U)
    if X.shape != truth.shape:
        print_usage_error(f"shape mismatch: recovered {X.shape}, truth {truth.shape}")
        return 1
    mask = ~np.isnan(truth)
    if mask.all():
        rel = matcomp.relative_error(X, truth)
        rms = matcomp.rmse(X, truth)
        ps = matcomp.psnr(X, truth, peak=args.peak)
    else:
        # evaluation-only truth files: restrict the sums to observed entries
        diff = np.linalg.norm(X[mask] - truth[mask])
        ref = np.linalg.norm(truth[mask])
        if ref == 0:
            print_usage_error("observed part of the truth matrix is zero")
            return 1
        rel = float(diff / ref)
        rms = float(diff / truth.shape[0])
        ps = (matcomp.PSNR_CAP if diff == 0 else float(min(
            10.0 * np.log10(args.peak ** 2 * mask.sum() / diff ** 2),
            matcomp.PSNR_CAP)))
    metrics = {
        "relative_error": rel,
        "rmse": rms,
        "psnr": ps,
        "rank_of_recovered": matcomp.numerical_rank(X),
    }
    _dump_json(metrics, args.out)
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iplr",
        description="Low-rank SDP solver and matrix-completion pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic instance")
    g.add_argument("--nhat", type=int, required=True)
    g.add_argument("--rank", type=int, required=True)
    g.add_argument("--m", type=int, default=_env("--m", None, int),
                   help="observed entries; default (0.01*nhat+4)*r*(2*nhat-r)")
    g.add_argument("--seed", type=int, default=_env("--seed", 0, int))
    g.add_argument("--noise", type=float, default=_env("--noise", 0.0, float))
    g.add_argument("--kappa", type=float, default=_env("--kappa", None, float),
                   help="condition number of the generated matrix")
    g.add_argument("--xi", type=float, default=_env("--xi", None, float),
                   help="singular-value perturbation scale (nearly low rank)")
    g.add_argument("--out-dir", default=_env("--out-dir", "."))
    g.add_argument("--prefix", default=_env("--prefix", "instance"))
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the solver on an entries file")
    s.add_argument("--entries", required=True)
    s.add_argument("--nhat", type=int, default=_env("--nhat", None, int))
    s.add_argument("--inner", choices=["gs", "bb"],
                   default=_env("--inner", "gs"))
    s.add_argument("--precond", choices=["none", "schur"],
                   default=_env("--precond", "schur"))
    s.add_argument("--rank", type=int, default=_env("--rank", 1, int),
                   help="initial rank")
    s.add_argument("--delta-rank", type=int, default=_env("--delta-rank", 1, int))
    s.add_argument("--mu0", type=float, default=_env("--mu0", 1.0, float))
    s.add_argument("--sigma", type=float, default=_env("--sigma", 0.5, float))
    s.add_argument("--eta1", type=float, default=_env("--eta1", 0.9, float))
    s.add_argument("--eta2", type=float, default=_env("--eta2", None, float),
                   help="gradient tolerance multiplier; default sqrt(n)")
    s.add_argument("--epsilon", type=float, default=_env("--epsilon", 1e-4, float))
    s.add_argument("--cg-tol", type=float, default=_env("--cg-tol", 1e-6, float))
    s.add_argument("--cg-maxit", type=int, default=_env("--cg-maxit", 100, int))
    s.add_argument("--gs-sweeps", type=int, default=_env("--gs-sweeps", 100, int),
                   help="Gauss-Seidel sweep cap per outer iteration")
    s.add_argument("--bb-maxit", type=int, default=_env("--bb-maxit", 300, int))
    s.add_argument("--seed", type=int, default=_env("--seed", 0, int))
    s.add_argument("--deterministic", action="store_true",
                   default=_env("--deterministic", False, bool),
                   help="omit timing from the report so reruns are bit-identical")
    s.add_argument("--report", default=_env("--report", None))
    s.add_argument("--factor-out", default=_env("--factor-out", None))
    s.add_argument("--emit-dense", default=_env("--emit-dense", None))
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="compare a recovery against ground truth")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--recovered", help="dense recovered matrix CSV")
    src.add_argument("--factor", help="factor CSV; the recovered matrix is "
                                      "its top block times bottom block transposed")
    e.add_argument("--truth", required=True)
    e.add_argument("--peak", type=float, default=_env("--peak", 255.0, float))
    e.add_argument("--out", default=_env("--out", None))
    e.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
