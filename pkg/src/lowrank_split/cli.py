"""Command-line interface: ``prox``, ``solve``, ``certify`` and ``hankel-bench``.

Exit codes: 0 success, 1 certificate without guarantee, 2 usage or
configuration error, 3 no limit point reached (diverged or budget
exhausted), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import dr_limit_point_check, dual_from_primal, rank_bound_check
from .errors import CapabilityError, ConfigError, InputError, LowRankSplitError, NumericalError
from .experiments import ExperimentConfig, hankel_bench, load_config, problem_from_config, resolve_seed, resolve_z0
from .gauges import Gauge, ScalarFunc
from .matrix import numerical_rank, read_matrix, write_matrix
from .prox import (
    ObjectiveSpec,
    prox_conjugate,
    prox_envelope,
    prox_equivalence_conditions,
    prox_nonconvex_rank,
    prox_scaled_gauge,
)
from .runs import Relaxation, solve_dr, solve_fb
from .solvers import SolverConfig, Status, write_trace_csv

EXIT_OK, EXIT_NO_GUARANTEE, EXIT_USAGE, EXIT_DIVERGED, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def _seq(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowrank-split", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prox", help="apply a proximal operator to a matrix file")
    p.add_argument("--op", choices=["nonconvex", "envelope", "conjugate", "gauge"], required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--gamma", type=_positive_float, default=1.0)
    p.add_argument("--k", choices=[k.value for k in ScalarFunc], default=ScalarFunc.HALF_SQUARE.value)
    p.add_argument("--gauge", choices=[g.value for g in Gauge], default=Gauge.L2.value)
    p.add_argument("--report", help="also write the equivalence report to this file")
    p.add_argument("input")
    p.add_argument("output")

    def problem_args(sp, out_required):
        sp.add_argument("--config", help="flat key = value file; flags override it")
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--problem", dest="problem_file", help="problem file")
        src.add_argument("--hankel-seq", dest="sequence", type=_seq, help="Hankel generator h_0,h_1,...")
        sp.add_argument("--n", type=int, help="Hankel size (default 10, or inferred from --hankel-seq)")
        sp.add_argument("--gamma", type=_positive_float)
        sp.add_argument("--rho", type=float)
        sp.add_argument("--z0", help="zero | random | path to a matrix file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--max-iter", dest="max_iter", type=int)
        sp.add_argument("--tol", type=_positive_float)
        sp.add_argument("--out", dest="out_dir", required=out_required, help="output directory")

    s = sub.add_parser("solve", help="run Douglas-Rachford or forward-backward")
    problem_args(s, True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--algo", choices=["dr", "fb"], default="dr")
    s.add_argument("--relaxation", choices=[x.value for x in Relaxation], default=Relaxation.NONCONVEX.value)

    c = sub.add_parser("certify", help="dual certificate from a solve's terminal Z and M")
    c.add_argument("--r", type=int, required=True)
    c.add_argument("--gamma", type=_positive_float, default=1.0)
    c.add_argument("z_star")
    c.add_argument("m_star")

    b = sub.add_parser("hankel-bench", help="convex vs non-convex DR sweep over rank budgets")
    problem_args(b, False)
    b.add_argument("--r-min", dest="r_min", type=int)
    b.add_argument("--r-max", dest="r_max", type=int)
    b.add_argument("--algorithms", choices=["convex", "nonconvex", "both"])
    b.add_argument("--jobs", type=int)
    return parser


def _cmd_prox(args) -> int:
    Z = read_matrix(args.input)
    spec = ObjectiveSpec(r=args.r, gamma=args.gamma, k=ScalarFunc(args.k), g=Gauge(args.gauge))
    if args.r > min(Z.shape):
        raise InputError(f"r={args.r} exceeds min(n, m)={min(Z.shape)}")
    if args.op == "nonconvex":
        out, tie = prox_nonconvex_rank(spec, Z)
        if tie:
            print("warning: sigma_r == sigma_(r+1); returned one member of the prox set", file=sys.stderr)
    elif args.op == "envelope":
        out = prox_envelope(spec, Z)
    elif args.op == "conjugate":
        out = prox_conjugate(spec, Z)
    else:
        out = prox_scaled_gauge(spec, Z)
    write_matrix(args.output, out)
    if spec.k is ScalarFunc.HALF_SQUARE:
        report = prox_equivalence_conditions(spec, Z).summary()
        print(report)
        if args.report:
            Path(args.report).write_text(report + "\n")
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    keys = ["n", "sequence", "problem_file", "gamma", "rho", "z0", "seed", "max_iter", "tol", "out_dir",
            "r_min", "r_max", "algorithms", "jobs"]
    overrides = {k: getattr(args, k, None) for k in keys}
    return load_config(args.config, overrides)


def _cmd_solve(args) -> int:
    cfg = _experiment_config(args)
    problem = problem_from_config(cfg)
    if not 1 <= args.r <= min(problem.shape):
        raise ConfigError(f"r={args.r} outside 1..{min(problem.shape)}")
    seed = resolve_seed(cfg.seed)
    z0 = resolve_z0(cfg.z0, problem.shape, seed)
    scfg = SolverConfig(gamma=cfg.gamma, rho=cfg.rho, max_iter=cfg.max_iter, tol_fixed_point=cfg.tol, z0=z0)
    spec = ObjectiveSpec(r=args.r, gamma=cfg.gamma)
    relaxation = Relaxation(args.relaxation)
    if args.algo == "dr":
        trace = solve_dr(problem, spec, relaxation, scfg)
    else:
        try:
            trace = solve_fb(problem, spec, relaxation, scfg)
        except CapabilityError as exc:
            raise ConfigError(f"forward-backward needs a smooth f2: {exc}") from None

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace.csv", trace)
    for name, mat in (("X", trace.X), ("Y", trace.Y), ("Z", trace.Z), ("M", trace.X)):
        write_matrix(out / f"{name}.mat", mat)

    lines = [
        f"status = {trace.status.value}",
        f"iterations = {trace.iterations}",
        f"res_fix = {trace.res_fix:.6e}",
        f"rank_x = {numerical_rank(trace.X)}",
        f"seed = {seed}",
        f"svd_r ties = {len(trace.tie_iterations)}",
    ]
    guarantee = False
    if trace.converged and args.algo == "dr":
        M_c = trace.X if relaxation is Relaxation.CONVEX else prox_envelope(spec, trace.Z)
        cert = dual_from_primal(trace.Z, M_c, cfg.gamma, args.r)
        guarantee = cert.low_rank_guarantee
        lines += [cert.report(), f"rank_bound_ok = {str(rank_bound_check(M_c, cert)).lower()}"]
        if numerical_rank(trace.X) <= args.r:
            lp = dr_limit_point_check(trace.X, trace.Z, cfg.gamma, args.r, relaxation, problem.subgradient_residual)
            lines.append(f"limit_point_check = {str(lp.passed()).lower()} (max residual {lp.max_residual():.3e})")
    (out / "certificate.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if trace.status is not Status.CONVERGED:
        return EXIT_DIVERGED
    if args.algo == "dr" and relaxation is Relaxation.CONVEX and not guarantee:
        print("note: no low-rank guarantee for this convex solution", file=sys.stderr)
    return EXIT_OK


def _cmd_certify(args) -> int:
    Z = read_matrix(args.z_star)
    M = read_matrix(args.m_star)
    cert = dual_from_primal(Z, M, args.gamma, args.r)
    print(cert.report())
    print(f"rank(M*) = {numerical_rank(M)}")
    print(f"rank_bound_ok = {str(rank_bound_check(M, cert)).lower()}")
    return EXIT_OK if cert.low_rank_guarantee else EXIT_NO_GUARANTEE


def _cmd_bench(args) -> int:
    cfg = _experiment_config(args)
    rows = hankel_bench(cfg)
    for row in rows:
        print(
            f"r={row.r}: convex {row.status_convex} rank {row.rank_convex} err {row.err_convex_raw:.6f}; "
            f"nonconvex {row.status_nonconvex} err {row.err_nonconvex:.6f}; lower bound {row.lower_bound_err:.6f}"
            + (f"; ERROR {row.error}" if row.error else "")
        )
    print(f"wrote {Path(cfg.out_dir) / 'rank_conv.csv'} and {Path(cfg.out_dir) / 'err.csv'}")
    return EXIT_NUMERICAL if any(row.error for row in rows) else EXIT_OK


_COMMANDS = {"prox": _cmd_prox, "solve": _cmd_solve, "certify": _cmd_certify, "hankel-bench": _cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ConfigError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LowRankSplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
