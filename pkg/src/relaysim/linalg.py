"""Complex linear-algebra kernels shared by the rest of the package.

Matrices are plain complex ``numpy.ndarray`` objects. Most kernels also
accept stacks of matrices with shape ``(..., rows, cols)`` so callers can
process all relays of a realization in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ContractViolation",
    "NumericFailure",
    "SingularMatrixError",
    "SvdFactors",
    "as_matrix",
    "svd_thin",
    "pseudo_inverse",
    "min_gram_eigenvalue",
    "logdet_hermitian_psd",
    "water_fill",
]

_EPS = np.finfo(float).eps


class ContractViolation(ValueError):
    """An input broke the documented precondition of a kernel."""


class NumericFailure(ArithmeticError):
    """A decomposition did not converge or produced non-finite output."""


class SingularMatrixError(NumericFailure):
    """A matrix expected to be positive definite had a non-positive pivot."""


def as_matrix(a, *, stacked: bool = False) -> np.ndarray:
    """Return `a` as a complex array, rejecting NaN/Inf entries.

    With ``stacked=False`` the input must be exactly two-dimensional.
    """
    arr = np.asarray(a, dtype=complex)
    if stacked:
        if arr.ndim < 2:
            raise ContractViolation(f"expected a stack of matrices, got ndim={arr.ndim}")
    elif arr.ndim != 2:
        raise ContractViolation(f"expected a 2-D matrix, got shape {arr.shape}")
    if 0 in arr.shape[-2:]:
        raise ContractViolation(f"matrix dimensions must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("matrix has non-finite entries")
    return arr


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = u @ diag(sigma) @ v^H``.

    ``u`` has orthonormal columns (rows x r), ``v`` has orthonormal columns
    (cols x r) and ``sigma`` is sorted in descending order.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        """Number of retained singular triplets ``r``."""
        return self.sigma.shape[-1]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma[..., None, :]) @ np.conj(np.swapaxes(self.v, -1, -2))


def svd_thin(a, rank: int | None = None) -> SvdFactors:
    """Thin singular value decomposition.

    Parameters
    ----------
    a : array_like
        Matrix (or stack of matrices) with finite entries.
    rank : int, optional
        Keep only the leading `rank` singular triplets. Defaults to
        ``min(rows, cols)``.

    Returns
    -------
    SvdFactors

    Raises
    ------
    NumericFailure
        If LAPACK fails to converge.
    """
    arr = as_matrix(a, stacked=True)
    r_max = min(arr.shape[-2:])
    if rank is None:
        rank = r_max
    if not 0 < rank <= r_max:
        raise ContractViolation(f"rank must be in [1, {r_max}], got {rank}")
    try:
        u, s, vh = np.linalg.svd(arr, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(u))):
        raise NumericFailure("SVD produced non-finite factors")
    v = np.conj(np.swapaxes(vh, -1, -2))
    return SvdFactors(u=u[..., :rank], sigma=s[..., :rank], v=v[..., :rank])


def _rank_cutoff(shape, sigma_max):
    return max(shape[-2:]) * _EPS * sigma_max


def pseudo_inverse(a, return_rank: bool = False):
    """Moore-Penrose pseudo-inverse.

    Singular values below ``max(rows, cols) * eps * sigma_max`` are treated
    as zero. Works on stacks; with ``return_rank=True`` the numerical rank
    of every matrix is returned as well.
    """
    arr = as_matrix(a, stacked=True)
    f = svd_thin(arr)
    sigma_max = f.sigma[..., :1]
    keep = f.sigma > _rank_cutoff(arr.shape, sigma_max)
    inv_sigma = np.where(keep, 1.0 / np.where(keep, f.sigma, 1.0), 0.0)
    pinv = (f.v * inv_sigma[..., None, :]) @ np.conj(np.swapaxes(f.u, -1, -2))
    if return_rank:
        return pinv, keep.sum(axis=-1)
    return pinv


def min_gram_eigenvalue(a) -> float | np.ndarray:
    """Smallest eigenvalue of ``a @ a^H`` (the squared smallest singular value).

    When ``rows > cols`` the Gram matrix is rank deficient and the result is 0.
    """
    arr = as_matrix(a, stacked=True)
    rows, cols = arr.shape[-2:]
    try:
        s = np.linalg.svd(arr, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    out = s[..., -1] ** 2
    if rows > cols:
        out = np.zeros_like(out)
    return float(out) if np.ndim(out) == 0 else out


def logdet_hermitian_psd(a) -> float | np.ndarray:
    """Natural-log determinant of a Hermitian positive definite matrix.

    Raises
    ------
    ContractViolation
        If the input departs from Hermitian symmetry by more than 1e-8
        relative (Frobenius).
    SingularMatrixError
        If the Cholesky factorization hits a non-positive pivot.
    """
    arr = as_matrix(a, stacked=True)
    if arr.shape[-1] != arr.shape[-2]:
        raise ContractViolation(f"logdet needs square input, got {arr.shape[-2:]}")
    asym = np.linalg.norm(arr - np.conj(np.swapaxes(arr, -1, -2)), axis=(-2, -1))
    scale = np.linalg.norm(arr, axis=(-2, -1))
    if np.any(asym > 1e-8 * np.maximum(scale, 1e-300)):
        raise ContractViolation("matrix is not Hermitian")
    herm = 0.5 * (arr + np.conj(np.swapaxes(arr, -1, -2)))
    try:
        chol = np.linalg.cholesky(herm)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    diag = np.real(np.diagonal(chol, axis1=-2, axis2=-1))
    if np.any(diag <= 0):
        raise SingularMatrixError("non-positive Cholesky pivot")
    out = 2.0 * np.sum(np.log(diag), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def water_fill(gains, budget: float) -> np.ndarray:
    """Water-filling power allocation over parallel channels.

    Maximizes ``sum(log(1 + g_i p_i))`` subject to ``sum(p_i) = budget`` and
    ``p_i >= 0``. The active set is found exactly from the sorted
    breakpoints ``1 / g_i``.

    Parameters
    ----------
    gains : array_like
        Positive channel power gains.
    budget : float
        Total power, ``>= 0``.

    Returns
    -------
    np.ndarray
        Powers in the same order as `gains`.
    """
    g = np.asarray(gains, dtype=float).ravel()
    if g.size == 0:
        raise ContractViolation("water_fill needs at least one channel")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise ContractViolation("gains must be finite and positive")
    if not np.isfinite(budget) or budget < 0:
        raise ContractViolation("budget must be finite and nonnegative")

    order = np.argsort(-g, kind="stable")
    floors = 1.0 / g[order]  # ascending
    n_vals = np.arange(1, g.size + 1)
    levels = (budget + np.cumsum(floors)) / n_vals
    # Largest n whose level clears the n-th floor; n = 1 always qualifies.
    feasible = levels >= floors
    n_active = int(n_vals[feasible][-1])
    mu = levels[n_active - 1]

    sorted_p = np.maximum(mu - floors, 0.0)
    sorted_p[n_active:] = 0.0
    powers = np.empty_like(sorted_p)
    powers[order] = sorted_p
    return powers
