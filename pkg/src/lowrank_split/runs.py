"""Glue between objectives, problems and the generic drivers."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .matrix import as_matrix
from .problems import ProblemSpec, f2_grad, f2_prox, objective_eval
from .prox import ObjectiveSpec, prox_envelope, prox_nonconvex_rank
from .solvers import IterateTrace, SolverConfig, douglas_rachford, forward_backward

__all__ = ["Relaxation", "make_prox1", "make_prox2", "solve_dr", "solve_fb", "PairResult", "run_pair"]


class Relaxation(enum.Enum):
    CONVEX = "convex"
    NONCONVEX = "nonconvex"


def make_prox1(spec: ObjectiveSpec, relaxation: Relaxation) -> Callable:
    """Prox provider for ``gamma f1`` (non-convex) or ``gamma f1**`` (convex)."""
    if Relaxation(relaxation) is Relaxation.CONVEX:
        return lambda Z: prox_envelope(spec, Z)
    return lambda Z: prox_nonconvex_rank(spec, Z)


def make_prox2(problem: ProblemSpec, gamma: float) -> Callable:
    return lambda Z: f2_prox(problem, gamma, Z)


def _objective(problem, spec, relaxation):
    idx = 1 if Relaxation(relaxation) is Relaxation.CONVEX else 0
    return lambda X: objective_eval(problem, spec, X)[idx]


def _spec_for(spec: ObjectiveSpec, cfg: SolverConfig) -> ObjectiveSpec:
    if spec.gamma != cfg.gamma:
        spec = spec.with_gamma(cfg.gamma)
    return spec


def solve_dr(problem: ProblemSpec, spec: ObjectiveSpec, relaxation: Relaxation, cfg: SolverConfig,
             callback=None) -> IterateTrace:
    """Douglas-Rachford on ``f1 + f2`` (or ``f1** + f2``) with ``gamma = cfg.gamma``."""
    spec = _spec_for(spec, cfg)
    return douglas_rachford(
        make_prox1(spec, relaxation),
        make_prox2(problem, cfg.gamma),
        cfg,
        shape=tuple(problem.shape),
        objective=_objective(problem, spec, relaxation),
        callback=callback,
    )


def solve_fb(problem: ProblemSpec, spec: ObjectiveSpec, relaxation: Relaxation, cfg: SolverConfig,
             callback=None) -> IterateTrace:
    spec = _spec_for(spec, cfg)
    _, L = f2_grad(problem, np.zeros(problem.shape))
    return forward_backward(
        make_prox1(spec, relaxation),
        lambda X: f2_grad(problem, X)[0],
        L,
        cfg,
        shape=tuple(problem.shape),
        objective=_objective(problem, spec, relaxation),
        callback=callback,
    )


@dataclass
class PairResult:
    convex: IterateTrace
    nonconvex: IterateTrace
    #: flags[k-1] is True when X_k agrees between the two runs
    flags: list[bool]

    @property
    def all_equal(self) -> bool:
        return all(self.flags)


def run_pair(problem: ProblemSpec, r: int, gamma: float = 1.0, rho: float = 1.0, z0=None,
             cfg: SolverConfig | None = None, tol: float = 1e-8) -> PairResult:
    """Run convex and non-convex Douglas-Rachford from the same ``z0``.

    Iterations are compared up to the shorter run; a flag is True when
    ``||X^c_k - X^n_k||_F <= tol * max(1, ||X^c_k||_F)``.
    """
    if cfg is None:
        cfg = SolverConfig(gamma=gamma, rho=rho)
    else:
        cfg = dataclasses.replace(cfg, gamma=gamma, rho=rho)
    if z0 is not None:
        cfg = dataclasses.replace(cfg, z0=as_matrix(z0, "z0"))
    if cfg.z0 is not None and cfg.z0.shape != tuple(problem.shape):
        raise ConfigError("z0 shape does not match the problem")
    spec = ObjectiveSpec(r=r, gamma=gamma)

    xs_c: list[np.ndarray] = []
    xs_n: list[np.ndarray] = []
    conv = solve_dr(problem, spec, Relaxation.CONVEX, cfg, callback=lambda k, X, Y, Z: xs_c.append(X))
    nonc = solve_dr(problem, spec, Relaxation.NONCONVEX, cfg, callback=lambda k, X, Y, Z: xs_n.append(X))
    flags = [
        bool(np.linalg.norm(a - b) <= tol * max(1.0, float(np.linalg.norm(a))))
        for a, b in zip(xs_c, xs_n)
    ]
    return PairResult(conv, nonc, flags)
