"""Douglas-Rachford and forward-backward drivers.

A *prox provider* is a callable ``Z -> X`` with the step size already baked
in. It may also return ``(X, tie_flag)``; tie flags are counted in the trace
(the non-convex prox does this when ``svd_r`` is set-valued).
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, LowRankSplitError, NumericalError
from .matrix import numerical_rank

__all__ = [
    "Status",
    "SolverConfig",
    "IterRecord",
    "IterateTrace",
    "ProviderError",
    "douglas_rachford",
    "forward_backward",
    "trace_to_csv",
    "write_trace_csv",
]


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


class ProviderError(LowRankSplitError):
    """A prox or gradient provider raised; `iteration` is where it happened."""

    def __init__(self, iteration: int, exc: BaseException):
        super().__init__(f"provider failed at iteration {iteration}: {exc!r}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 1.0
    rho: float = 1.0
    max_iter: int = 50_000
    tol_fixed_point: float = 1e-9
    tol_step: float = math.inf
    record_trace: bool = True
    z0: np.ndarray | None = None
    #: Diverged when ||Z_k||_F exceeds this
    norm_limit: float = 1e12
    #: Diverged when the best residual has not dropped by `stall_improvement`
    #: within this many iterations; 0 disables the check
    stall_window: int = 1000
    stall_improvement: float = 1e-12

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.rho < 2:
            raise ConfigError(f"rho must lie in (0, 2), got {self.rho}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not self.tol_fixed_point > 0 or not self.tol_step > 0:
            raise ConfigError("tolerances must be positive")
        if self.stall_window < 0:
            raise ConfigError("stall_window must be >= 0")


@dataclass(frozen=True)
class IterRecord:
    k: int
    res_fix: float
    res_step: float
    objective: float
    rank_x: int


@dataclass
class IterateTrace:
    status: Status
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    iterations: int
    res_fix: float
    min_res_fix: float
    records: list[IterRecord] = field(default_factory=list)
    tie_iterations: list[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _call_prox(prox, Z, k, ties):
    try:
        out = prox(Z)
    except LowRankSplitError as exc:
        raise ProviderError(k, exc) from exc
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise ProviderError(k, exc) from exc
    if isinstance(out, tuple):
        out, tie = out
        if tie:
            ties.append(k)
    return out


class _Monitor:
    """Book-keeping shared by both drivers: records, stall and blow-up checks."""

    def __init__(self, cfg: SolverConfig, objective):
        self.cfg = cfg
        self.objective = objective
        self.records: list[IterRecord] = []
        self.best = math.inf
        self.best_k = 0
        self.min_res = math.inf

    def step(self, k, X, Z, res_fix, res_step) -> Status | None:
        cfg = self.cfg
        if not (math.isfinite(res_fix) and math.isfinite(res_step)):
            raise NumericalError(f"non-finite iterate at iteration {k}")
        self.min_res = min(self.min_res, res_fix)
        if cfg.record_trace:
            obj = self.objective(X) if self.objective is not None else math.nan
            self.records.append(IterRecord(k, res_fix, res_step, obj, numerical_rank(X)))
        if res_fix <= cfg.tol_fixed_point and res_step <= cfg.tol_step:
            return Status.CONVERGED
        if np.linalg.norm(Z) > cfg.norm_limit:
            return Status.DIVERGED
        if res_fix < self.best - cfg.stall_improvement:
            self.best, self.best_k = res_fix, k
        elif cfg.stall_window and k - self.best_k >= cfg.stall_window:
            return Status.DIVERGED
        return None


def _initial(cfg: SolverConfig, shape):
    if cfg.z0 is None:
        if shape is None:
            raise ConfigError("need z0 or an explicit shape")
        return np.zeros(shape)
    z0 = np.array(cfg.z0, dtype=float)
    if shape is not None and z0.shape != tuple(shape):
        raise ConfigError(f"z0 has shape {z0.shape}, expected {tuple(shape)}")
    return z0


def douglas_rachford(
    prox1: Callable,
    prox2: Callable,
    cfg: SolverConfig,
    shape: tuple[int, int] | None = None,
    objective: Callable[[np.ndarray], float] | None = None,
    callback: Callable[[int, np.ndarray, np.ndarray, np.ndarray], None] | None = None,
) -> IterateTrace:
    """Relaxed Douglas-Rachford splitting.

    ``X_k = prox1(Z_{k-1})``, ``Y_k = prox2(2 X_k - Z_{k-1})``,
    ``Z_k = Z_{k-1} + rho (Y_k - X_k)``. Stops when ``||Y_k - X_k||_F`` is
    below ``cfg.tol_fixed_point`` (and ``||Z_k - Z_{k-1}||_F`` below
    ``cfg.tol_step``), on divergence, or after ``cfg.max_iter`` iterations.
    `callback` receives ``(k, X_k, Y_k, Z_k)`` after every iteration.
    """
    Z = _initial(cfg, shape)
    mon = _Monitor(cfg, objective)
    ties: list[int] = []
    X = Y = Z
    status = Status.MAX_ITER
    res_fix = math.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        X = _call_prox(prox1, Z, k, ties)
        Y = _call_prox(prox2, 2.0 * X - Z, k, ties)
        diff = Y - X
        Z_new = Z + cfg.rho * diff
        res_fix = float(np.linalg.norm(diff))
        res_step = cfg.rho * res_fix
        Z = Z_new
        if callback is not None:
            callback(k, X, Y, Z)
        st = mon.step(k, X, Z, res_fix, res_step)
        if st is not None:
            status = st
            break
    return IterateTrace(status, X, Y, Z, k, res_fix, mon.min_res, mon.records, ties)


def forward_backward(
    prox1: Callable,
    grad_f2: Callable[[np.ndarray], np.ndarray],
    L: float,
    cfg: SolverConfig,
    shape: tuple[int, int] | None = None,
    objective: Callable[[np.ndarray], float] | None = None,
    callback: Callable[[int, np.ndarray, np.ndarray, np.ndarray], None] | None = None,
) -> IterateTrace:
    """Forward-backward splitting with ``cfg.z0`` as the starting point ``X_0``.

    ``Z_k = X_{k-1} - gamma grad_f2(X_{k-1})``, ``X_k = prox1(Z_k)``; requires
    ``0 < gamma < 2 / L``. The stopping residual is ``||X_k - X_{k-1}||_F``.
    The `prox1` provider must already use the same ``gamma``.
    """
    if L < 0:
        raise ConfigError(f"Lipschitz constant must be >= 0, got {L}")
    if L > 0 and not cfg.gamma < 2.0 / L:
        raise ConfigError(f"forward-backward needs gamma < 2/L = {2.0 / L}, got {cfg.gamma}")
    X = _initial(cfg, shape)
    Z_prev = X
    mon = _Monitor(cfg, objective)
    ties: list[int] = []
    status = Status.MAX_ITER
    res_fix = math.inf
    Z = X
    k = 0
    for k in range(1, cfg.max_iter + 1):
        try:
            g = grad_f2(X)
        except (LowRankSplitError, ArithmeticError, ValueError) as exc:
            raise ProviderError(k, exc) from exc
        Z = X - cfg.gamma * g
        X_new = _call_prox(prox1, Z, k, ties)
        res_fix = float(np.linalg.norm(X_new - X))
        res_step = float(np.linalg.norm(Z - Z_prev))
        X, Z_prev = X_new, Z
        if callback is not None:
            callback(k, X, X, Z)
        st = mon.step(k, X, Z, res_fix, res_step)
        if st is not None:
            status = st
            break
    return IterateTrace(status, X, X, Z, k, res_fix, mon.min_res, mon.records, ties)


CSV_COLUMNS = ("iter", "res_fix", "res_step", "objective", "rank_x")


def trace_to_csv(trace: IterateTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in trace.records:
        w.writerow([rec.k, f"{rec.res_fix:.17g}", f"{rec.res_step:.17g}", f"{rec.objective:.17g}", rec.rank_x])
    return buf.getvalue()


def write_trace_csv(path: str | os.PathLike, trace: IterateTrace) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(trace_to_csv(trace))
    os.replace(tmp, path)
