"""Hankel approximation benchmark and shared experiment configuration."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, LowRankSplitError
from .matrix import numerical_rank, read_matrix
from .problems import (
    HankelApprox,
    ProblemSpec,
    build_triangle_hankel,
    hankel_from_sequence,
    lower_bound,
    read_problem,
)
from .prox import ObjectiveSpec
from .runs import Relaxation, solve_dr
from .solvers import SolverConfig, Status, write_trace_csv

__all__ = [
    "ExperimentConfig",
    "load_config",
    "resolve_seed",
    "resolve_z0",
    "problem_from_config",
    "BenchRow",
    "hankel_bench",
]

SEED_ENV = "LOWRANK_SPLIT_SEED"


@dataclass
class ExperimentConfig:
    #: Hankel size; defaults to 10 for the triangle matrix and is inferred
    #: from the generator length when `sequence` is given
    n: int | None = None
    sequence: list[float] | None = None
    problem_file: str | None = None
    r_min: int = 1
    r_max: int | None = None
    gamma: float = 1.0
    rho: float = 1.0
    z0: str = "zero"
    seed: int = 0
    max_iter: int = 50_000
    tol: float = 1e-9
    out_dir: str = "bench_out"
    algorithms: str = "both"
    jobs: int = 1
    extra: dict[str, str] = field(default_factory=dict)

    def validate(self, q: int) -> None:
        r_max = self.r_max if self.r_max is not None else q - 1
        if not 1 <= self.r_min <= r_max <= q:
            raise ConfigError(f"r range {self.r_min}..{r_max} outside 1..{q}")
        if self.algorithms not in ("convex", "nonconvex", "both"):
            raise ConfigError(f"algorithms must be convex, nonconvex or both, got {self.algorithms!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, value: str):
    if key == "sequence":
        return [float(v) for v in value.split(",") if v.strip()]
    typ = _FIELD_TYPES[key]
    if "int" in typ and "list" not in typ:
        return int(value)
    if typ == "float":
        return float(value)
    return value


def load_config(path: str | os.PathLike | None, overrides: dict | None = None) -> ExperimentConfig:
    """Flat ``key = value`` file (``#`` comments) with overrides applied last."""
    values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            values[key] = value.strip()
    cfg = ExperimentConfig()
    for key, value in values.items():
        if key not in _FIELD_TYPES or key == "extra":
            cfg.extra[key] = value
            continue
        try:
            setattr(cfg, key, _coerce(key, value))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def resolve_seed(seed: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return int(seed)
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None


def resolve_z0(spec: str, shape, seed: int) -> np.ndarray:
    """``zero``, ``random`` (standard normal, `seed`) or a matrix file path."""
    if spec == "zero":
        return np.zeros(shape)
    if spec == "random":
        return np.random.default_rng(seed).standard_normal(shape)
    z0 = read_matrix(spec)
    if z0.shape != tuple(shape):
        raise ConfigError(f"z0 file has shape {z0.shape}, expected {tuple(shape)}")
    return z0


def problem_from_config(cfg: ExperimentConfig) -> ProblemSpec:
    """Problem file if given, else the Hankel matrix of `sequence`, else the triangle Hankel."""
    if cfg.problem_file is not None:
        return read_problem(cfg.problem_file)
    if cfg.sequence is not None:
        return HankelApprox(hankel_from_sequence(cfg.sequence, cfg.n))
    return HankelApprox(build_triangle_hankel(10 if cfg.n is None else cfg.n))


def bench_problem(cfg: ExperimentConfig) -> HankelApprox:
    p = problem_from_config(cfg)
    if not isinstance(p, HankelApprox):
        raise ConfigError("hankel-bench needs a Hankel problem")
    return p


@dataclass
class BenchRow:
    r: int
    status_convex: str = ""
    status_nonconvex: str = ""
    iters_convex: int = 0
    iters_nonconvex: int = 0
    rank_convex: int = -1
    rank_nonconvex: int = -1
    err_convex_raw: float = math.nan
    err_nonconvex: float = math.nan
    lower_bound_obj: float = math.nan
    lower_bound_err: float = math.nan
    err_convex_feasible: float = math.nan
    trace_convex: str = ""
    trace_nonconvex: str = ""
    error: str = ""
    X_convex: np.ndarray | None = None
    Z_convex: np.ndarray | None = None
    X_nonconvex: np.ndarray | None = None
    Z_nonconvex: np.ndarray | None = None


def _run_one(p: HankelApprox, r: int, cfg: ExperimentConfig, z0: np.ndarray, out: Path | None) -> BenchRow:
    row = BenchRow(r)
    scfg = SolverConfig(gamma=cfg.gamma, rho=cfg.rho, max_iter=cfg.max_iter, tol_fixed_point=cfg.tol, z0=z0,
                        record_trace=out is not None)
    spec = ObjectiveSpec(r=r, gamma=cfg.gamma)
    h_norm = float(np.linalg.norm(p.H))
    try:
        if cfg.algorithms in ("convex", "both"):
            tr = solve_dr(p, spec, Relaxation.CONVEX, scfg)
            row.status_convex, row.iters_convex = tr.status.value, tr.iterations
            row.X_convex, row.Z_convex = tr.X, tr.Z
            row.rank_convex = numerical_rank(tr.X)
            row.err_convex_raw = p.relative_error(tr.X)
            lb = lower_bound(p, spec, tr.X)
            row.lower_bound_obj = lb
            row.lower_bound_err = math.sqrt(max(2.0 * lb, 0.0)) / h_norm
            if out is not None:
                row.trace_convex = f"trace_convex_r{r}.csv"
                write_trace_csv(out / row.trace_convex, tr)
        if cfg.algorithms in ("nonconvex", "both"):
            tr = solve_dr(p, spec, Relaxation.NONCONVEX, scfg)
            row.status_nonconvex, row.iters_nonconvex = tr.status.value, tr.iterations
            row.X_nonconvex, row.Z_nonconvex = tr.X, tr.Z
            row.rank_nonconvex = numerical_rank(tr.X)
            row.err_nonconvex = p.relative_error(tr.X)
            if out is not None:
                row.trace_nonconvex = f"trace_nonconvex_r{r}.csv"
                write_trace_csv(out / row.trace_nonconvex, tr)
    except LowRankSplitError as exc:
        row.error = str(exc)
    return row


def _fill_feasible_convex(rows: list[BenchRow]) -> None:
    # best convex-relaxation solution of the sweep whose rank fits the budget
    for row in rows:
        errs = [o.err_convex_raw for o in rows
                if o.status_convex == Status.CONVERGED.value and 0 <= o.rank_convex <= row.r]
        row.err_convex_feasible = min(errs) if errs else math.nan


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buf.getvalue())
    os.replace(tmp, path)


def _g(x: float) -> str:
    return f"{x:.17g}"


def hankel_bench(cfg: ExperimentConfig, write: bool = True) -> list[BenchRow]:
    """Run convex relaxation and non-convex DR for every rank budget.

    Writes ``rank_conv.csv`` (``r,rank_convex``), ``err.csv``
    (``rank,err_convex,err_nonconvex,lower_bound``), ``runs.csv`` (status,
    iterations and trace file per budget) and one trace CSV per run.
    ``err_convex`` is the smallest relative error among convex-relaxation
    solutions of the sweep with rank at most the budget; ``lower_bound`` is
    the relative-error form ``sqrt(2 * bound) / ||H||`` of the relaxation's
    optimal value.
    """
    p = bench_problem(cfg)
    q = min(p.shape)
    cfg.validate(q)
    seed = resolve_seed(cfg.seed)
    z0 = resolve_z0(cfg.z0, p.shape, seed)
    r_max = cfg.r_max if cfg.r_max is not None else q - 1
    out = Path(cfg.out_dir) if write else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    budgets = range(cfg.r_min, r_max + 1)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(lambda r: _run_one(p, r, cfg, z0, out), budgets))
    else:
        rows = [_run_one(p, r, cfg, z0, out) for r in budgets]
    _fill_feasible_convex(rows)
    if out is not None:
        _write_csv(out / "rank_conv.csv", ["r", "rank_convex"], [[row.r, row.rank_convex] for row in rows])
        _write_csv(
            out / "err.csv",
            ["rank", "err_convex", "err_nonconvex", "lower_bound"],
            [[row.r, _g(row.err_convex_feasible), _g(row.err_nonconvex), _g(row.lower_bound_err)] for row in rows],
        )
        _write_csv(
            out / "runs.csv",
            ["r", "status_convex", "iters_convex", "status_nonconvex", "iters_nonconvex", "rank_nonconvex",
             "err_convex_raw", "trace_convex", "trace_nonconvex", "error"],
            [[row.r, row.status_convex, row.iters_convex, row.status_nonconvex, row.iters_nonconvex,
              row.rank_nonconvex, _g(row.err_convex_raw), row.trace_convex, row.trace_nonconvex, row.error]
             for row in rows],
        )
        meta = [f"seed = {seed}", f"gamma = {cfg.gamma!r}", f"rho = {cfg.rho!r}", f"z0 = {cfg.z0}",
                f"n = {p.shape[0]}", f"max_iter = {cfg.max_iter}", f"tol = {cfg.tol!r}"]
        (out / "bench_meta.txt").write_text("\n".join(meta) + "\n")
    return rows
