"""Proximal operators of the rank-constrained function and of its convex envelope.

For ``f1 = k(||.||_g) + indicator(rank <= r)`` with ``k = t**2 / 2`` and the
Frobenius gauge:

* the non-convex prox is ``svd_r(Z) / (1 + gamma)``;
* the envelope prox is obtained from the prox of the conjugate
  ``f1* = 1/2 (sum of the r largest squared singular values)`` through the
  Moreau decomposition ``M = Z - Y``.

Both work on singular values and reuse the singular vectors of `Z`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, InputError
from .gauges import Gauge, ScalarFunc, low_rank_inducing_norm_vec
from .matrix import _check_rank, as_matrix, full_svd, svd_r

__all__ = [
    "ObjectiveSpec",
    "ProxEquivalenceReport",
    "conjugate_prox_vec",
    "prox_scaled_gauge",
    "prox_nonconvex_rank",
    "prox_envelope",
    "prox_conjugate",
    "envelope_decomposition",
    "moreau_check",
    "fenchel_young_gap",
    "prox_equivalence_conditions",
]


@dataclass(frozen=True)
class ObjectiveSpec:
    """``gamma * (k(||M||_g) + indicator(rank(M) <= r))`` and its envelope."""

    r: int
    gamma: float = 1.0
    k: ScalarFunc = ScalarFunc.HALF_SQUARE
    g: Gauge = Gauge.L2

    def __post_init__(self):
        if isinstance(self.r, bool) or int(self.r) != self.r or self.r < 1:
            raise InputError(f"rank budget must be a positive integer, got {self.r}")
        if not self.gamma > 0 or not np.isfinite(self.gamma):
            raise InputError(f"gamma must be positive and finite, got {self.gamma}")
        object.__setattr__(self, "k", ScalarFunc(self.k))
        object.__setattr__(self, "g", Gauge(self.g))

    def with_gamma(self, gamma: float) -> "ObjectiveSpec":
        return ObjectiveSpec(r=self.r, gamma=gamma, k=self.k, g=self.g)

    def _require_envelope_support(self):
        if self.k is not ScalarFunc.HALF_SQUARE or self.g is not Gauge.L2:
            raise CapabilityError(
                f"envelope prox implemented for k=half-square, g=l2 only (got {self.k.value}, {self.g.value})"
            )


def conjugate_prox_vec(w, c: float, r: int) -> np.ndarray:
    """Solve ``min_y c/2 * sum_{i<=r} y_[i]**2 + 1/2 ||y - w||**2`` exactly.

    `w` must be nonincreasing and nonnegative (singular values). ``y_[i]``
    denotes the i-th largest entry. The solution is nonincreasing; entries
    ``r-t+1 .. r+s`` are pooled at a common level ``theta`` and every
    candidate ``(t, s)`` is checked against the optimality conditions,
    keeping the feasible one with the smallest objective.
    """
    w = np.asarray(w, dtype=float)
    q = len(w)
    r = _check_rank(r, q)
    if c <= 0:
        raise InputError(f"c must be positive, got {c}")
    wl = w.tolist()
    prefix = [0.0]
    for v in wl:
        prefix.append(prefix[-1] + v)
    tol = 1e-12 * max(wl[0], 1.0)
    a = 1.0 + c

    feasible = []
    fallback = (np.inf, 1, 0, 0.0)
    for t in range(1, r + 1):
        lo = r - t
        above = wl[lo - 1] if lo > 0 else np.inf
        top = wl[lo]
        for s in range(0, q - r + 1):
            hi = r + s
            theta = (prefix[hi] - prefix[lo]) / ((hi - lo) + c * t)
            below = wl[hi] if hi < q else -np.inf
            viol = max(theta - wl[hi - 1], top - a * theta, a * theta - above, below - theta)
            if viol <= tol:
                feasible.append((t, s, theta))
            elif viol < fallback[0]:
                fallback = (viol, t, s, theta)
    if not feasible:
        feasible = [fallback[1:]]

    best_y, best_obj = None, np.inf
    for t, s, theta in feasible:
        lo, hi = r - t, r + s
        y = w.copy()
        y[:lo] = w[:lo] / a
        y[lo:hi] = theta
        if len(feasible) == 1:
            return y
        obj = 0.5 * c * (np.sum(y[:lo] ** 2) + t * theta * theta) + 0.5 * np.sum((y - w) ** 2)
        if obj < best_obj:
            best_y, best_obj = y, obj
    return best_y


def prox_scaled_gauge(spec: ObjectiveSpec, P) -> np.ndarray:
    """``argmin_M gamma k(||M||_g) + 1/2 ||M - P||_F**2`` for the Frobenius gauge."""
    P = as_matrix(P, "P")
    if spec.g is not Gauge.L2:  # pragma: no cover
        raise CapabilityError(f"gauge {spec.g.value!r}")
    if spec.k is ScalarFunc.HALF_SQUARE:
        return P / (1.0 + spec.gamma)
    nrm = np.linalg.norm(P)
    if nrm <= spec.gamma:
        return np.zeros_like(P)
    return (1.0 - spec.gamma / nrm) * P


def prox_nonconvex_rank(spec: ObjectiveSpec, Z) -> tuple[np.ndarray, bool]:
    """One member of the prox of the rank-constrained function at `Z`.

    Computed as the gauge prox of ``svd_r(Z)``; the flag reports whether
    ``svd_r(Z)`` was set-valued, in which case the prox is too.
    """
    P, tie = svd_r(Z, spec.r)
    return prox_scaled_gauge(spec, P), tie


def envelope_decomposition(spec: ObjectiveSpec, Z):
    """Return ``(svd, m, y)``: the SVD of `Z`, singular values of the envelope
    prox, and the solution of the scaled conjugate subproblem.

    ``Z = U diag(m + gamma * y) V^T`` holds entrywise on the vectors.
    """
    spec._require_envelope_support()
    f = full_svd(Z)
    _check_rank(spec.r, f.q)
    gamma = spec.gamma
    w = f.sigma / gamma
    y = conjugate_prox_vec(w, 1.0 / gamma, spec.r)
    m = gamma * (w - y)
    np.maximum(m, 0.0, out=m)
    return f, m, y


def prox_envelope(spec: ObjectiveSpec, Z) -> np.ndarray:
    """Prox of ``gamma * k(||.||_{g,r*})`` at `Z` (unique, convex)."""
    f, m, _ = envelope_decomposition(spec, Z)
    return f.reconstruct(m)


def prox_conjugate(spec: ObjectiveSpec, Z) -> np.ndarray:
    """``gamma * prox_{k+(||.||_{gD,r}) / gamma}(Z / gamma)``."""
    f, _, y = envelope_decomposition(spec, Z)
    return f.reconstruct(spec.gamma * y)


def moreau_check(spec: ObjectiveSpec, Z) -> float:
    """Frobenius residual of ``prox_envelope(Z) + prox_conjugate(Z) - Z``."""
    Z = as_matrix(Z, "Z")
    return float(np.linalg.norm(prox_envelope(spec, Z) + prox_conjugate(spec, Z) - Z))


def fenchel_young_gap(spec: ObjectiveSpec, Z) -> float:
    """``f**(M) + f*(D) - <M, D>`` at ``M = prox_envelope(Z)``, ``D = (Z - M) / gamma``.

    Zero exactly when ``D`` is a subgradient of the envelope at ``M``, i.e.
    when `M` satisfies the prox optimality condition. Evaluated on the
    singular values since ``M`` and ``D`` share singular vectors.
    """
    _, m, y = envelope_decomposition(spec, Z)
    env = 0.5 * low_rank_inducing_norm_vec(m, spec.r) ** 2
    conj = 0.5 * float(np.sum(np.sort(y)[::-1][: spec.r] ** 2))
    return env + conj - float(m @ y)


@dataclass(frozen=True)
class ProxEquivalenceReport:
    """The four equivalent conditions for the two proxes to coincide at `Z`."""

    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    cond_iv: bool
    M_c: np.ndarray
    M_n: np.ndarray
    gap: float
    tie_flag: bool
    tol: float

    @property
    def conditions(self) -> tuple[bool, bool, bool, bool]:
        return (self.cond_i, self.cond_ii, self.cond_iii, self.cond_iv)

    @property
    def consistent(self) -> bool:
        return len(set(self.conditions)) == 1

    def summary(self) -> str:
        lines = [
            f"(i)   envelope prox equals rank-constrained prox: {self.cond_i}",
            f"(ii)  rank(M_c) <= r:                              {self.cond_ii}",
            f"(iii) trailing singular values of Z - M_c kept:    {self.cond_iii}",
            f"(iv)  sigma_r(Z - M_c) >= sigma_(r+1)(Z):          {self.cond_iv}",
            f"gap sigma_r(Z - M_c) - sigma_(r+1)(Z) = {self.gap:.6e}",
            f"svd_r tie: {self.tie_flag}",
        ]
        return "\n".join(lines)


def prox_equivalence_conditions(spec: ObjectiveSpec, Z, tol: float | None = None) -> ProxEquivalenceReport:
    """Evaluate conditions (i)-(iv) at `Z` with tolerance ``1e-8 max(1, sigma_1(Z))``."""
    Z = as_matrix(Z, "Z")
    spec._require_envelope_support()
    M_c = prox_envelope(spec, Z)
    M_n, tie = prox_nonconvex_rank(spec, Z)
    sz = np.linalg.svd(Z, compute_uv=False)
    q, r = len(sz), spec.r
    if tol is None:
        tol = 1e-8 * max(1.0, float(sz[0]))
    sd = np.linalg.svd(Z - M_c, compute_uv=False)
    smc = np.linalg.svd(M_c, compute_uv=False)
    next_z = sz[r] if r < q else 0.0
    gap = float(sd[r - 1] - next_z)
    return ProxEquivalenceReport(
        cond_i=bool(np.linalg.norm(M_c - M_n) <= tol),
        cond_ii=bool(np.count_nonzero(smc > tol) <= r),
        cond_iii=bool(r == q or np.max(np.abs(sd[r:] - sz[r:])) <= tol),
        cond_iv=bool(gap >= -tol),
        M_c=M_c,
        M_n=M_n,
        gap=gap,
        tie_flag=tie,
        tol=tol,
    )
