"""Dual certificates, rank bounds and Douglas-Rachford limit-point checks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError
from .matrix import as_matrix, full_svd, numerical_rank
from .problems import ProblemSpec
from .prox import ObjectiveSpec, prox_envelope
from .runs import Relaxation, solve_dr
from .solvers import SolverConfig

__all__ = [
    "DualCertificate",
    "dual_from_primal",
    "primal_radius",
    "rank_bound_check",
    "AttractionTrial",
    "AttractionReport",
    "attraction_ball_test",
    "LimitPointReport",
    "dr_limit_point_check",
    "subgradient_test_for",
]


@dataclass(frozen=True)
class DualCertificate:
    """Dual point ``D* = (Z* - M*) / gamma`` and what its spectrum certifies.

    `epsilon` is the radius of the ball around ``Z*`` on which the convex and
    non-convex iterations coincide; it is zero when ``sigma_r(D*)`` is tied
    with ``sigma_{r+1}(D*)``.
    """

    D_star: np.ndarray
    r: int
    gamma: float
    sigma_r: float
    sigma_r_plus_1: float
    tie_multiplicity: int
    epsilon: float
    low_rank_guarantee: bool
    tau_tie: float

    def report(self) -> str:
        return "\n".join(
            [
                f"r = {self.r}",
                f"gamma = {self.gamma:.17g}",
                f"sigma_r(D*) = {self.sigma_r:.17g}",
                f"sigma_(r+1)(D*) = {self.sigma_r_plus_1:.17g}",
                f"tie_multiplicity = {self.tie_multiplicity}",
                f"epsilon = {self.epsilon:.17g}",
                f"low_rank_guarantee = {str(self.low_rank_guarantee).lower()}",
            ]
        )


def dual_from_primal(Z_star, M_star, gamma: float, r: int, tau_tie: float | None = None) -> DualCertificate:
    """Certificate from a convex fixed point ``(Z*, M*)``.

    The guarantee holds when ``sigma_r(D*) != sigma_{r+1}(D*)`` (beyond the
    tie tolerance) or ``sigma_r(D*) == 0``.
    """
    Z_star = as_matrix(Z_star, "Z_star")
    M_star = as_matrix(M_star, "M_star")
    if Z_star.shape != M_star.shape:
        raise InputError(f"shape mismatch: {Z_star.shape} vs {M_star.shape}")
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    D = (Z_star - M_star) / gamma
    f = full_svd(D, tau_tie)
    if not 1 <= r <= f.q:
        raise InputError(f"rank budget r={r} outside 1..{f.q}")
    s_r = float(f.sigma[r - 1])
    s_next = float(f.sigma[r]) if r < f.q else 0.0
    s = f.multiplicity_after(r)
    tied = r < f.q and s_r - s_next <= f.tau_tie
    zero = s_r <= f.tau_tie
    eps = 0.0 if tied else gamma * (s_r - s_next)
    return DualCertificate(
        D_star=D,
        r=r,
        gamma=gamma,
        sigma_r=s_r,
        sigma_r_plus_1=s_next,
        tie_multiplicity=s,
        epsilon=eps,
        low_rank_guarantee=bool(not tied or zero),
        tau_tie=f.tau_tie,
    )


def primal_radius(Z_star, M_star, r: int) -> float:
    """``sigma_r(Z* - M*) - sigma_{r+1}(Z*)``, the primal form of `epsilon`."""
    sd = np.linalg.svd(as_matrix(Z_star) - as_matrix(M_star), compute_uv=False)
    sz = np.linalg.svd(as_matrix(Z_star), compute_uv=False)
    return float(sd[r - 1] - (sz[r] if r < len(sz) else 0.0))


def rank_bound_check(M_star, cert: DualCertificate, r: int | None = None) -> bool:
    """True iff ``rank(M*) <= r + s`` with `s` the tie multiplicity of ``D*``.

    When ``sigma_r(D*) == 0`` the bound tightens to ``rank(M*) <= r``.
    """
    r = cert.r if r is None else r
    s = 0 if cert.sigma_r <= cert.tau_tie else cert.tie_multiplicity
    return numerical_rank(M_star) <= r + s


@dataclass(frozen=True)
class AttractionTrial:
    start_distance: float
    converged: bool
    #: ||Z_final - Z*||_F
    final_distance: float
    #: ||X_final - X*||_F with X* the envelope prox of Z*
    solution_distance: float
    proxes_agree: bool
    iterations: int
    dist_tol: float

    @property
    def passed(self) -> bool:
        """Converged to ``Z*`` itself with matching proxes along the way."""
        return self.converged and self.final_distance <= self.dist_tol and self.proxes_agree

    @property
    def reached_solution(self) -> bool:
        """Converged to the same solution ``X*`` without leaving the ball.

        Douglas-Rachford fixed points need not be unique even when the
        solution is, so this is the weaker, always meaningful outcome.
        """
        return (
            self.converged
            and self.solution_distance <= self.dist_tol
            and self.final_distance <= self.start_distance + self.dist_tol
            and self.proxes_agree
        )


@dataclass
class AttractionReport:
    radius: float
    trials: list[AttractionTrial] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.trials)

    @property
    def reached_solution(self) -> bool:
        return all(t.reached_solution for t in self.trials)

    def summary(self) -> str:
        ok = sum(t.passed for t in self.trials)
        sol = sum(t.reached_solution for t in self.trials)
        n = len(self.trials)
        return (
            f"ball radius {self.radius:.6g}: {ok}/{n} trials returned to Z*, "
            f"{sol}/{n} reached the same solution with agreeing proxes"
        )


def attraction_ball_test(
    problem: ProblemSpec,
    cert: DualCertificate,
    Z_star,
    trials: int,
    radius_factor: float = 0.9,
    seed: int = 0,
    cfg: SolverConfig | None = None,
    dist_tol: float = 1e-6,
    prox_tol: float = 1e-8,
) -> AttractionReport:
    """Start non-convex DR at random points of the ball around ``Z*``.

    Points are drawn uniformly from the ball of radius
    ``radius_factor * cert.epsilon``. For every trial the report records
    whether the run converged, how far its terminal ``Z`` and ``X`` are from
    ``Z*`` and ``X* = prox_envelope(Z*)``, and whether at every iterate
    ``Z_{k-1}`` the non-convex prox agreed with the envelope prox within
    ``prox_tol * max(1, ||X_k||_F)``.
    """
    Z_star = as_matrix(Z_star, "Z_star")
    radius = radius_factor * cert.epsilon
    report = AttractionReport(radius)
    if trials == 0:
        return report
    if not cert.epsilon > 0:
        raise InputError("attraction test needs a certificate with epsilon > 0")
    cfg = SolverConfig(gamma=cert.gamma) if cfg is None else dataclasses.replace(cfg, gamma=cert.gamma)
    spec = ObjectiveSpec(r=cert.r, gamma=cert.gamma)
    X_star = prox_envelope(spec, Z_star)
    rng = np.random.default_rng(seed)
    dim = Z_star.size
    for _ in range(trials):
        direction = rng.standard_normal(Z_star.shape)
        direction /= np.linalg.norm(direction)
        dist = radius * rng.uniform() ** (1.0 / dim)
        z0 = Z_star + dist * direction
        state = {"prev": z0, "agree": True}

        def check(k, X, Y, Z, state=state):
            Mc = prox_envelope(spec, state["prev"])
            if np.linalg.norm(Mc - X) > prox_tol * max(1.0, float(np.linalg.norm(X))):
                state["agree"] = False
            state["prev"] = Z

        tr = solve_dr(problem, spec, Relaxation.NONCONVEX, dataclasses.replace(cfg, z0=z0, record_trace=False),
                      callback=check)
        report.trials.append(
            AttractionTrial(
                start_distance=dist,
                converged=tr.converged,
                final_distance=float(np.linalg.norm(tr.Z - Z_star)),
                solution_distance=float(np.linalg.norm(tr.X - X_star)),
                proxes_agree=state["agree"],
                iterations=tr.iterations,
                dist_tol=dist_tol,
            )
        )
    return report


@dataclass(frozen=True)
class LimitPointReport:
    R: np.ndarray
    orth_left: float
    orth_right: float
    subgrad_residual: float
    sigma_bound_ok: bool
    sigma_1_R: float
    sigma_bound: float
    mode: Relaxation

    def max_residual(self) -> float:
        return max(self.orth_left, self.orth_right, self.subgrad_residual)

    def passed(self, tol: float = 1e-6) -> bool:
        return self.sigma_bound_ok and self.max_residual() <= tol


def dr_limit_point_check(
    X_star,
    Z_star,
    gamma: float,
    r: int,
    mode: Relaxation,
    f2_subgradient_test: Callable[[np.ndarray, np.ndarray], float],
    tol: float = 1e-6,
) -> LimitPointReport:
    """Check the limit-point characterisation for ``f1 = ||.||**2 / 2 + rank <= r``.

    ``R = (Z* - (1 + gamma) X*) / gamma``, which equals ``D* - X*`` for the
    convex run. The conditions are ``R^T X* = 0``, ``X* R^T = 0``,
    ``-X* - R`` in the subdifferential of f2 at ``X*`` (tested by
    `f2_subgradient_test(X, G)`, which returns a nonnegative residual), and
    ``sigma_1(R) <= c sigma_r(X*)`` with ``c = 1`` (convex) or
    ``1 + 1/gamma`` (non-convex).
    """
    X = as_matrix(X_star, "X_star")
    Z = as_matrix(Z_star, "Z_star")
    if X.shape != Z.shape:
        raise InputError(f"shape mismatch: {X.shape} vs {Z.shape}")
    if numerical_rank(X) > r:
        raise InputError(f"X* has numerical rank {numerical_rank(X)} > r={r}")
    mode = Relaxation(mode)
    R = (Z - (1.0 + gamma) * X) / gamma
    sx = np.linalg.svd(X, compute_uv=False)
    s1R = float(np.linalg.norm(R, 2))
    factor = 1.0 if mode is Relaxation.CONVEX else 1.0 + 1.0 / gamma
    bound = factor * float(sx[r - 1])
    return LimitPointReport(
        R=R,
        orth_left=float(np.linalg.norm(R.T @ X)),
        orth_right=float(np.linalg.norm(X @ R.T)),
        subgrad_residual=float(f2_subgradient_test(X, -X - R)),
        sigma_bound_ok=bool(s1R <= bound + tol),
        sigma_1_R=s1R,
        sigma_bound=bound,
        mode=mode,
    )


def subgradient_test_for(problem: ProblemSpec) -> Callable[[np.ndarray, np.ndarray], float]:
    return problem.subgradient_residual

