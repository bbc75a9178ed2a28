"""Dense matrix helpers: validated arrays, SVD with tie metadata, truncation,
Hankel projection and plain-text / CSV I/O.

All functions treat their inputs as immutable and return fresh arrays.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

__all__ = [
    "SvdFactorization",
    "as_matrix",
    "tie_tolerance",
    "full_svd",
    "svd_r",
    "numerical_rank",
    "hankel_project",
    "is_hankel",
    "inner",
    "frob_norm",
    "read_matrix",
    "write_matrix",
]

#: relative factor used for the default tie tolerance 1e-9 * max(sigma_1, 1)
TIE_RTOL = 1e-9
#: relative threshold for numerical rank: sigma_i > RANK_RTOL * sigma_1
RANK_RTOL = 1e-8


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Return `A` as a finite 2-D float64 array (copy), or raise InputError."""
    try:
        arr = np.array(A, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: not a numeric matrix ({exc})") from None
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name}: expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: matrix has non-finite entries")
    return arr


def tie_tolerance(sigma) -> float:
    """Default tie tolerance for a singular value vector."""
    s1 = float(sigma[0]) if len(sigma) else 0.0
    return TIE_RTOL * max(s1, 1.0)


def _tie_groups(sigma: np.ndarray, tau: float) -> tuple[tuple[int, ...], ...]:
    groups: list[list[int]] = [[0]]
    for i in range(1, len(sigma)):
        if sigma[groups[-1][-1]] - sigma[i] <= tau:
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD ``A = U @ diag(sigma) @ V.T`` with ``q = min(n, m)`` columns.

    ``tie_groups`` partitions ``0..q-1`` (zero-based) into maximal runs of
    singular values that agree within ``tau_tie``.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    tau_tie: float

    @functools.cached_property
    def tie_groups(self) -> tuple[tuple[int, ...], ...]:
        return _tie_groups(self.sigma, self.tau_tie)

    @property
    def q(self) -> int:
        return len(self.sigma)

    def reconstruct(self, values=None) -> np.ndarray:
        """``U diag(values) V^T``; `values` defaults to the singular values."""
        d = self.sigma if values is None else np.asarray(values, dtype=float)
        return (self.U * d) @ self.V.T

    def tied(self, i: int, j: int) -> bool:
        """True if zero-based indices `i` and `j` fall in the same tie group."""
        for g in self.tie_groups:
            if i in g:
                return j in g
        return False

    def multiplicity_after(self, r: int) -> int:
        """Largest s with sigma_r = ... = sigma_{r+s} (one-based r)."""
        s = 0
        while r + s < self.q and self.sigma[r - 1] - self.sigma[r + s] <= self.tau_tie:
            s += 1
        return s


def full_svd(A, tau_tie: float | None = None) -> SvdFactorization:
    """Deterministic thin SVD of `A` (LAPACK gesdd via numpy).

    Parameters
    ----------
    A : array_like
        Finite real matrix.
    tau_tie : float, optional
        Absolute tolerance for grouping equal singular values. Defaults to
        ``1e-9 * max(sigma_1, 1)``.
    """
    A = as_matrix(A)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise InputError(f"SVD failed: {exc}") from None
    tau = tie_tolerance(s) if tau_tie is None else float(tau_tie)
    return SvdFactorization(U=U, sigma=s, V=Vt.T, tau_tie=tau)


def _check_rank(r: int, q: int) -> int:
    if isinstance(r, bool) or int(r) != r or not 1 <= int(r) <= q:
        raise InputError(f"rank budget r={r} outside 1..{q}")
    return int(r)


def svd_r(A, r: int, tau_tie: float | None = None) -> tuple[np.ndarray, bool]:
    """Best rank-`r` approximation and a flag for the set-valued case.

    Returns ``(sum_{i<=r} sigma_i u_i v_i^T, tie_flag)``. `tie_flag` is True iff
    ``sigma_r == sigma_{r+1}`` within the tie tolerance; the matrix is then one
    deterministic member of the set of best approximations. For ``r == q`` the
    flag is always False.
    """
    f = full_svd(A, tau_tie)
    r = _check_rank(r, f.q)
    tie = r < f.q and f.sigma[r - 1] - f.sigma[r] <= f.tau_tie
    d = f.sigma.copy()
    d[r:] = 0.0
    return f.reconstruct(d), bool(tie)


def numerical_rank(A, rtol: float = RANK_RTOL, atol: float = 0.0) -> int:
    """Number of singular values above ``max(rtol * sigma_1, atol)``."""
    s = np.linalg.svd(as_matrix(A), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > max(rtol * s[0], atol)))


@functools.lru_cache(maxsize=32)
def _antidiagonal_index(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    n, m = shape
    idx = (np.arange(n)[:, None] + np.arange(m)[None, :]).ravel()
    idx.setflags(write=False)
    counts = np.bincount(idx)
    counts.setflags(write=False)
    return idx, counts


def hankel_project(A) -> np.ndarray:
    """Orthogonal projection onto Hankel matrices: average each anti-diagonal.

    Square inputs are the primary use; rectangular inputs are accepted and
    projected onto rectangular Hankel matrices in the same way.
    """
    A = as_matrix(A)
    idx, counts = _antidiagonal_index(A.shape)
    sums = np.bincount(idx, weights=A.ravel())
    return (sums / counts)[idx].reshape(A.shape)


def is_hankel(A, atol: float = 0.0) -> bool:
    A = as_matrix(A)
    return bool(np.max(np.abs(A - hankel_project(A))) <= atol)


def inner(A, B) -> float:
    """Trace inner product ``trace(A^T B)``."""
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    if A.shape != B.shape:
        raise InputError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.vdot(A, B))


def frob_norm(A) -> float:
    return float(np.linalg.norm(as_matrix(A)))


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    """Read a dense matrix from ``.csv`` or the plain-text ``n m`` format.

    The plain-text format has a header line ``n m`` followed by `n` rows of
    `m` whitespace-separated decimals.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read matrix file {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".csv":
            rows = [ln for ln in text.splitlines() if ln.strip()]
            data = [[float(v) for v in ln.split(",")] for ln in rows]
            return as_matrix(data, str(path))
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        n, m = (int(v) for v in lines[0].split())
        data = [[float(v) for v in ln.split()] for ln in lines[1 : 1 + n]]
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed matrix file ({exc})") from None
    if len(data) != n or any(len(row) != m for row in data):
        raise InputError(f"{path}: header says {n}x{m} but body does not match")
    return as_matrix(data, str(path))


def format_matrix(A) -> str:
    """Plain-text ``n m`` representation, lossless at 17 significant digits."""
    A = as_matrix(A)
    body = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in A)
    return f"{A.shape[0]} {A.shape[1]}\n{body}\n"


def write_matrix(path: str | os.PathLike, A) -> None:
    """Write `A` atomically; format chosen by suffix (``.csv`` or plain text)."""
    path = Path(path)
    A = as_matrix(A)
    if path.suffix.lower() == ".csv":
        text = "\n".join(",".join(f"{v:.17g}" for v in row) for row in A) + "\n"
    else:
        text = format_matrix(A)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
