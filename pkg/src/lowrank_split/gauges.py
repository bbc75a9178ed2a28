"""Symmetric gauges, the outer scalar function k, and low-rank inducing norms.

Only the Frobenius (``L2``) gauge is enabled. A new gauge needs `evaluate`
(the gauge on a nonnegative vector), `dual_evaluate` (the dual gauge) and, for
:func:`low_rank_inducing_norm_eval`, a way to maximise over the truncated
dual ball.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import CapabilityError, InputError
from .matrix import _check_rank, as_matrix

__all__ = [
    "Gauge",
    "ScalarFunc",
    "gauge_eval",
    "truncated_dual_gauge_eval",
    "low_rank_inducing_norm_eval",
    "low_rank_inducing_norm_vec",
    "monotone_conjugate_eval",
]


class Gauge(enum.Enum):
    L2 = "l2"

    def evaluate(self, x) -> float:
        """Gauge of a vector (signs ignored)."""
        x = np.abs(np.asarray(x, dtype=float))
        if self is Gauge.L2:
            return float(np.linalg.norm(x))
        raise CapabilityError(f"gauge {self.value!r} not implemented")  # pragma: no cover

    def dual_evaluate(self, x) -> float:
        # l2 is self-dual
        return self.evaluate(x)


class ScalarFunc(enum.Enum):
    """Increasing convex outer function k on t >= 0."""

    HALF_SQUARE = "half-square"
    IDENTITY = "identity"

    def __call__(self, t: float) -> float:
        if t < 0:
            raise InputError(f"k is defined on t >= 0, got {t}")
        if self is ScalarFunc.HALF_SQUARE:
            return 0.5 * t * t
        return float(t)

    def monotone_conjugate(self, s: float) -> float:
        """``k+(s) = sup_{x >= 0} [x s - k(x)]``; may be ``math.inf``."""
        if self is ScalarFunc.HALF_SQUARE:
            return 0.5 * s * s if s > 0 else 0.0
        return 0.0 if s <= 1.0 else math.inf


def _singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def gauge_eval(g: Gauge, A) -> float:
    """Unitarily invariant norm ``g(sigma_1(A), ..., sigma_q(A))``."""
    return g.evaluate(_singular_values(A))


def truncated_dual_gauge_eval(g: Gauge, r: int, A) -> float:
    """Dual gauge applied to the top `r` singular values of `A`."""
    s = _singular_values(A)
    r = _check_rank(r, len(s))
    return g.dual_evaluate(s[:r])


def low_rank_inducing_norm_vec(sigma, r: int) -> float:
    """Low-rank inducing Frobenius norm of a nonincreasing nonnegative vector.

    The maximiser of ``<sigma, x>`` over the truncated dual ball keeps the
    leading ``r - t`` entries proportional to `sigma` and pools the trailing
    ``q - r + t`` entries at a common level ``T / t``, ``T`` being their sum.
    Every ``t`` whose pooled level does not exceed ``sigma_{r-t}`` yields a
    feasible point, so the norm is the largest of those candidate values.
    """
    s = np.asarray(sigma, dtype=float)
    r = _check_rank(r, len(s))
    tail = np.cumsum(s[::-1])[::-1]  # tail[j] = sum_{i >= j} s_i (zero-based)
    head_sq = np.concatenate(([0.0], np.cumsum(s**2)))
    best = 0.0
    for t in range(1, r + 1):
        k = r - t  # number of unpooled leading entries
        level = tail[k] / t
        if k > 0 and level > s[k - 1] * (1 + 1e-12) + 1e-300:
            continue
        best = max(best, head_sq[k] + tail[k] ** 2 / t)
    return math.sqrt(best)


def low_rank_inducing_norm_eval(g: Gauge, r: int, A) -> float:
    """Dual norm of the truncated dual gauge, ``max <A, X>`` over ``||X||_{gD,r} <= 1``."""
    if g is not Gauge.L2:  # pragma: no cover - only L2 ships
        raise CapabilityError(f"low-rank inducing norm for gauge {g.value!r}")
    return low_rank_inducing_norm_vec(_singular_values(A), r)


def monotone_conjugate_eval(k: ScalarFunc, s: float) -> float:
    if s < 0:
        raise InputError(f"monotone conjugate evaluated at s={s} < 0")
    return k.monotone_conjugate(s)
