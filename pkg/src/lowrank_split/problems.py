"""Convex terms f2 paired with the rank-constrained term, plus objective
evaluation and the lower bound supplied by the convex relaxation.

Variants
--------
HankelApprox
    ``f2(M) = -<M, H> + ||H||**2 / 2 + indicator(M Hankel)``. Together with
    ``k = t**2 / 2`` the composite objective is ``||M - H||_F**2 / 2``.
Completion
    ``f2 = indicator(M agrees with data on mask)``.
QuadraticFit
    ``f2(M) = ||M - A||_F**2 / 2`` (smooth, Lipschitz constant 1).
ZeroTerm
    ``f2 = 0``; reduces the splitting schemes to repeated proxes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapabilityError, InputError
from .gauges import low_rank_inducing_norm_eval
from .matrix import as_matrix, format_matrix, hankel_project, numerical_rank
from .prox import ObjectiveSpec

__all__ = [
    "HankelApprox",
    "Completion",
    "QuadraticFit",
    "ZeroTerm",
    "ProblemSpec",
    "f2_prox",
    "f2_grad",
    "f2_value",
    "objective_eval",
    "lower_bound",
    "build_triangle_hankel",
    "hankel_from_sequence",
    "read_problem",
    "write_problem",
]

#: relative tolerance for f2's constraint; matches the default fixed-point
#: tolerance so that converged iterates count as feasible
FEAS_RTOL = 1e-9


def _feas_tol(M, rtol):
    return rtol * max(1.0, float(np.linalg.norm(M)))


@dataclass(frozen=True, eq=False)
class HankelApprox:
    H: np.ndarray
    kind = "hankel"

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        if np.max(np.abs(H - hankel_project(H))) > 1e-12 * max(1.0, np.abs(H).max()):
            raise InputError("HankelApprox: H is not Hankel")
        object.__setattr__(self, "H", H)

    @property
    def shape(self):
        return self.H.shape

    def prox(self, gamma, Z):
        return hankel_project(Z + gamma * self.H)

    def value(self, M, rtol=FEAS_RTOL):
        if np.linalg.norm(M - hankel_project(M)) > _feas_tol(M, rtol):
            return math.inf
        return float(-np.vdot(M, self.H) + 0.5 * np.vdot(self.H, self.H))

    def subgradient_residual(self, X, G):
        # dom check plus: G + H must be orthogonal to the Hankel subspace
        return float(np.linalg.norm(X - hankel_project(X)) + np.linalg.norm(hankel_project(G + self.H)))

    def relative_error(self, M):
        return float(np.linalg.norm(self.H - M) / np.linalg.norm(self.H))


@dataclass(frozen=True, eq=False)
class Completion:
    mask: np.ndarray
    data: np.ndarray
    kind = "completion"

    def __post_init__(self):
        mask = np.asarray(self.mask)
        data = as_matrix(self.data, "data")
        if mask.shape != data.shape:
            raise InputError(f"Completion: mask {mask.shape} and data {data.shape} differ")
        if not np.all((mask == 0) | (mask == 1)):
            raise InputError("Completion: mask must be boolean / 0-1")
        mask = mask.astype(bool)
        data = np.where(mask, data, 0.0)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def prox(self, gamma, Z):
        return np.where(self.mask, self.data, Z)

    def value(self, M, rtol=FEAS_RTOL):
        if np.linalg.norm((M - self.data)[self.mask]) > _feas_tol(M, rtol):
            return math.inf
        return 0.0

    def subgradient_residual(self, X, G):
        return float(np.linalg.norm((X - self.data)[self.mask]) + np.linalg.norm(G[~self.mask]))


@dataclass(frozen=True, eq=False)
class QuadraticFit:
    A: np.ndarray
    kind = "quadratic"
    lipschitz = 1.0

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A, "A"))

    @property
    def shape(self):
        return self.A.shape

    def prox(self, gamma, Z):
        return (Z + gamma * self.A) / (1.0 + gamma)

    def grad(self, X):
        return X - self.A

    def value(self, M, rtol=FEAS_RTOL):
        return 0.5 * float(np.sum((M - self.A) ** 2))

    def subgradient_residual(self, X, G):
        return float(np.linalg.norm(G - (X - self.A)))


@dataclass(frozen=True, eq=False)
class ZeroTerm:
    shape: tuple[int, int] = field(default=(1, 1))
    kind = "zero"
    lipschitz = 0.0

    def prox(self, gamma, Z):
        return np.array(Z, dtype=float)

    def grad(self, X):
        return np.zeros_like(X)

    def value(self, M, rtol=FEAS_RTOL):
        return 0.0

    def subgradient_residual(self, X, G):
        return float(np.linalg.norm(G))


ProblemSpec = HankelApprox | Completion | QuadraticFit | ZeroTerm


def _check_shape(p, Z):
    Z = as_matrix(Z)
    if Z.shape != tuple(p.shape):
        raise InputError(f"matrix shape {Z.shape} does not match problem shape {tuple(p.shape)}")
    return Z


def f2_prox(p: ProblemSpec, gamma: float, Z) -> np.ndarray:
    """``prox_{gamma f2}(Z)``; the output is exactly feasible for f2's constraint."""
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    return p.prox(gamma, _check_shape(p, Z))


def f2_grad(p: ProblemSpec, X) -> tuple[np.ndarray, float]:
    """Gradient of a smooth f2 and its Lipschitz constant."""
    if not hasattr(p, "grad"):
        raise CapabilityError(f"f2 of variant {p.kind!r} is not differentiable")
    return p.grad(_check_shape(p, X)), p.lipschitz


def f2_value(p: ProblemSpec, M, rtol: float = FEAS_RTOL) -> float:
    return p.value(_check_shape(p, M), rtol)


def objective_eval(p: ProblemSpec, spec: ObjectiveSpec, M, rtol: float = FEAS_RTOL) -> tuple[float, float]:
    """Return ``(nonconvex value, envelope value)`` of the composite objective.

    The non-convex value is ``inf`` when the numerical rank of `M` exceeds
    ``spec.r``; both are ``inf`` when `M` violates f2's constraint by more than
    ``rtol * max(1, ||M||_F)``.
    """
    M = _check_shape(p, M)
    f2 = p.value(M, rtol)
    env = spec.k(low_rank_inducing_norm_eval(spec.g, spec.r, M)) + f2
    if numerical_rank(M) > spec.r:
        return math.inf, env
    return spec.k(float(np.linalg.norm(M))) + f2, env


def lower_bound(p: ProblemSpec, spec: ObjectiveSpec, M_convex_star, rtol: float = FEAS_RTOL) -> float:
    """Optimal value of the convex relaxation, evaluated at its solution.

    It lower-bounds the non-convex objective of every rank-feasible point.
    """
    return objective_eval(p, spec, M_convex_star, rtol)[1]


def hankel_from_sequence(seq, n: int | None = None) -> np.ndarray:
    """Square Hankel matrix ``H[i, j] = seq[i + j]``.

    Without `n` the sequence length must be odd (``2n - 1``); with `n` it is
    zero-padded to ``2n - 1``.
    """
    h = np.asarray([float(v) for v in seq], dtype=float)
    if n is None:
        if len(h) % 2 == 0:
            raise InputError(f"Hankel generator of length {len(h)} is not 2n-1; pass n explicitly")
        n = (len(h) + 1) // 2
    if n < 1 or len(h) > 2 * n - 1:
        raise InputError(f"generator of length {len(h)} does not fit a {n}x{n} Hankel matrix")
    h = np.concatenate((h, np.zeros(2 * n - 1 - len(h))))
    i = np.arange(n)
    return as_matrix(h[i[:, None] + i[None, :]])


def build_triangle_hankel(n: int) -> np.ndarray:
    """Hankel matrix generated by ``n`` ones followed by ``n - 1`` zeros."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    return hankel_from_sequence(np.ones(n), n)


def _parse_matrix_block(lines, pos, label):
    try:
        n, m = (int(v) for v in lines[pos].split())
        rows = [[float(v) for v in ln.split()] for ln in lines[pos + 1 : pos + 1 + n]]
    except (ValueError, IndexError) as exc:
        raise InputError(f"problem file: bad matrix block {label!r} ({exc})") from None
    if len(rows) != n or any(len(r) != m for r in rows):
        raise InputError(f"problem file: matrix {label!r} is not {n}x{m}")
    return np.array(rows, dtype=float), pos + 1 + n


def parse_problem(text: str) -> ProblemSpec:
    """Parse the structured problem format (see :func:`write_problem`)."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    fields: dict[str, object] = {}
    mats: dict[str, np.ndarray] = {}
    pos = 0
    while pos < len(lines):
        key, _, rest = lines[pos].partition(" ")
        if key == "matrix":
            mats[rest.strip()], pos = _parse_matrix_block(lines, pos + 1, rest.strip())
            continue
        fields[key] = rest.strip()
        pos += 1
    variant = fields.get("variant")
    try:
        if variant == "hankel":
            if "sequence" in fields:
                n = int(fields["n"]) if "n" in fields else None
                return HankelApprox(hankel_from_sequence(str(fields["sequence"]).split(","), n))
            if "triangle" in fields:
                return HankelApprox(build_triangle_hankel(int(fields["triangle"])))
            return HankelApprox(mats["H"])
        if variant == "completion":
            return Completion(mats["mask"], mats["data"])
        if variant == "quadratic":
            return QuadraticFit(mats["A"])
        if variant == "zero":
            n, m = (int(v) for v in str(fields["shape"]).split())
            return ZeroTerm((n, m))
    except KeyError as exc:
        raise InputError(f"problem file: variant {variant!r} is missing {exc}") from None
    except ValueError as exc:
        raise InputError(f"problem file: {exc}") from None
    raise InputError(f"problem file: unknown variant {variant!r}")


def read_problem(path: str | os.PathLike) -> ProblemSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read problem file {path}: {exc.strerror}") from None
    return parse_problem(text)


def format_problem(p: ProblemSpec) -> str:
    """Serialise: a ``variant`` line, then ``matrix <label>`` blocks in the
    plain-text matrix format (``shape n m`` for the zero variant)."""
    out = [f"variant {p.kind}"]
    if isinstance(p, HankelApprox):
        out.append("matrix H\n" + format_matrix(p.H))
    elif isinstance(p, Completion):
        out.append("matrix mask\n" + format_matrix(p.mask.astype(float)))
        out.append("matrix data\n" + format_matrix(p.data))
    elif isinstance(p, QuadraticFit):
        out.append("matrix A\n" + format_matrix(p.A))
    else:
        out.append(f"shape {p.shape[0]} {p.shape[1]}")
    return "\n".join(s.rstrip("\n") for s in out) + "\n"


def write_problem(path: str | os.PathLike, p: ProblemSpec) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(format_problem(p))
    os.replace(tmp, path)
