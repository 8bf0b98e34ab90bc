"""Dense linear-algebra kernel: SVD, pseudoinverse, matrix exponential,
orthonormalization and Pearson correlation.

All routines operate on plain float64 ``numpy`` arrays and are pure
functions of their inputs. Failures raise :class:`NumericalError`
subclasses instead of returning sentinel values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NumericalError(RuntimeError):
    """Base class for numerical failures (maps to CLI exit code 4)."""


class SvdConvergenceError(NumericalError):
    """The iterative SVD backend failed to converge.

    ``iterations`` carries the backend's exhausted iteration budget
    (the QR-iteration driver caps at 30 sweeps per singular value).
    """

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class RankDeficiencyError(NumericalError):
    """A column collapsed during orthonormalization; ``column`` names it."""

    def __init__(self, message: str, column: int):
        super().__init__(message)
        self.column = column


class ExpmOverflowError(NumericalError):
    """Matrix exponential overflowed for an extreme input norm."""


class ZeroVarianceError(NumericalError):
    """Pearson correlation is undefined for a constant vector."""


# LAPACK's QR-iteration SVD driver gives up after 30 sweeps per value.
_LAPACK_SVD_SWEEPS = 30


def check_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a float64 2-D array and reject empty or non-finite input."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = u @ diag(sigma) @ vt`` with deterministic column signs."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray


def svd(a) -> SvdResult:
    """Thin SVD with a fixed sign convention.

    Each left singular vector is flipped so its largest-magnitude entry
    is non-negative, making results reproducible across LAPACK builds.
    """
    arr = check_matrix(a, "svd input")
    try:
        u, sigma, vt = np.linalg.svd(arr, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails on pathological input; retry with the
        # slower but more robust QR-iteration driver before giving up.
        try:
            u, sigma, vt = scipy.linalg.svd(arr, full_matrices=False,
                                            lapack_driver="gesvd")
        except scipy.linalg.LinAlgError as exc:
            raise SvdConvergenceError(
                f"SVD did not converge within {_LAPACK_SVD_SWEEPS} QR sweeps "
                f"per singular value for shape {arr.shape}",
                iterations=_LAPACK_SVD_SWEEPS) from exc
    # Sign convention: largest-|entry| of every left singular vector >= 0.
    flip = u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    vt[flip, :] *= -1.0
    return SvdResult(u=u, sigma=sigma, vt=vt)


def pinv(a, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via the thin SVD.

    Singular values ``<= tol * sigma_max`` are truncated to zero;
    ``tol`` defaults to ``max(rows, cols) * eps``.
    """
    res = svd(a)
    rows, cols = res.u.shape[0], res.vt.shape[1]
    if tol is None:
        tol = max(rows, cols) * np.finfo(float).eps
    elif tol < 0:
        raise ValueError(f"pinv tolerance must be >= 0, got {tol}")
    sigma_max = res.sigma[0] if res.sigma.size else 0.0
    cutoff = tol * sigma_max
    inv_sigma = np.where(res.sigma > cutoff, 1.0 / np.where(res.sigma > 0, res.sigma, 1.0), 0.0)
    return (res.vt.T * inv_sigma) @ res.u.T


# Scaled norm below which a degree-10 Taylor polynomial reaches double
# precision: sum_{k>=11} theta^k/k! < 1e-13 for theta = 0.25.
_EXPM_THETA = 0.25
_EXPM_DEGREE = 10
_EXPM_MAX_SQUARINGS = 60


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of a truncated Taylor series."""
    arr = check_matrix(a, "expm input")
    n, m = arr.shape
    if n != m:
        raise ValueError(f"expm input must be square, got shape {arr.shape}")
    norm = np.linalg.norm(arr, 1)
    squarings = 0
    if norm > _EXPM_THETA:
        squarings = int(np.ceil(np.log2(norm / _EXPM_THETA)))
    if squarings > _EXPM_MAX_SQUARINGS:
        raise ExpmOverflowError(
            f"matrix 1-norm {norm:.3e} too extreme for expm "
            f"(would need {squarings} squarings)")
    scaled = arr / (2.0 ** squarings)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, _EXPM_DEGREE + 1):
        term = term @ scaled / k
        result += term
    for _ in range(squarings):
        result = result @ result
    if not np.isfinite(result).all():
        raise ExpmOverflowError(f"expm overflowed for matrix 1-norm {norm:.3e}")
    return result


def orthonormalize(u) -> np.ndarray:
    """Gram-Schmidt with one re-orthogonalization pass, columns left to right.

    The first column's direction is preserved (only normalized), so a
    leading constant column stays constant. Raises
    :class:`RankDeficiencyError` naming the offending column when a column
    norm collapses below 1e-12 relative to its input norm.
    """
    arr = check_matrix(u, "orthonormalize input")
    q = arr.copy()
    for j in range(q.shape[1]):
        v = q[:, j]
        input_norm = np.linalg.norm(v)
        # Second pass repairs the precision loss of classical projection.
        for _ in range(2):
            if j > 0:
                v = v - q[:, :j] @ (q[:, :j].T @ v)
        norm = np.linalg.norm(v)
        if norm <= 1e-12 * input_norm or norm == 0.0:
            raise RankDeficiencyError(
                f"column {j} is linearly dependent on preceding columns "
                f"(residual norm {norm:.3e})", column=j)
        q[:, j] = v / norm
    return q


def pearson(x, y) -> float:
    """Pearson correlation of two equal-length vectors, clipped to [-1, 1]."""
    xa = np.asarray(x, dtype=float).ravel()
    ya = np.asarray(y, dtype=float).ravel()
    if xa.size != ya.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise ValueError("pearson needs at least two samples")
    if not (np.isfinite(xa).all() and np.isfinite(ya).all()):
        raise ValueError("pearson input contains non-finite entries")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("pearson undefined: zero-variance input")
    return float(np.clip((xc @ yc) / np.sqrt(sx * sy), -1.0, 1.0))
