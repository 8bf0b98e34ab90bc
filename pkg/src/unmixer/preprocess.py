"""Preprocessing stage: center the transposed data, extract a leading
singular basis with a constant first column, and precompute the one-step
shift operator used for transition-matrix estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import NumericalError, check_matrix, orthonormalize, pinv, svd


class RankError(NumericalError):
    """Requested factorization rank exceeds what the data supports."""

    def __init__(self, message: str, achievable: int):
        super().__init__(message)
        self.achievable = achievable


@dataclass(frozen=True)
class PccaContext:
    """Immutable preprocessed bundle consumed by the objective.

    ``u`` is an m-by-rank orthonormal basis of timestep space whose first
    column is constant; ``s`` equals ``pinv(u[:-1]) @ u[1:]`` and advances
    basis coefficients by one timestep.
    """

    m: np.ndarray
    u: np.ndarray
    s: np.ndarray
    rank: int

    def __post_init__(self):
        for arr in (self.m, self.u, self.s):
            arr.setflags(write=False)


def drop_first_row(a) -> np.ndarray:
    """Return ``a`` without its first row."""
    arr = check_matrix(a)
    if arr.shape[0] < 2:
        raise ValueError("cannot drop a row from a single-row matrix")
    return arr[1:, :].copy()


def drop_last_row(a) -> np.ndarray:
    """Return ``a`` without its last row."""
    arr = check_matrix(a)
    if arr.shape[0] < 2:
        raise ValueError("cannot drop a row from a single-row matrix")
    return arr[:-1, :].copy()


def build_context(m, r: int) -> PccaContext:
    """Build the orthonormal timestep basis and shift operator for rank ``r``.

    Steps: transpose the n-by-m data, subtract each column's mean, take the
    SVD, prepend a constant column to the leading ``r - 1`` left singular
    vectors, orthonormalize (keeping the constant direction first), and
    precompute the shift operator.

    Raises :class:`RankError` when the centered data cannot support ``r``
    (fewer than ``r - 1`` significant singular values).
    """
    data = check_matrix(m, "data matrix")
    n, cols = data.shape
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")
    if r > min(n, cols):
        raise ValueError(f"rank {r} exceeds matrix dimensions {data.shape}")
    if cols < r + 1:
        raise ValueError(
            f"need at least rank+1 = {r + 1} timesteps, got {cols}")

    mt = data.T
    centered = mt - mt.mean(axis=0)
    res = svd(centered)
    # Rank cutoff is tied to the scale of the original data, so centering a
    # constant matrix down to rounding noise reads as rank zero.
    data_scale = max(res.sigma[0] if res.sigma.size else 0.0,
                     float(np.linalg.norm(mt)) / np.sqrt(min(mt.shape)))
    rank_cutoff = max(mt.shape) * np.finfo(float).eps * data_scale
    numerical_rank = int(np.count_nonzero(res.sigma > rank_cutoff))
    achievable = numerical_rank + 1
    if r > achievable:
        raise RankError(
            f"rank {r} not supported by the data: achievable rank is "
            f"{achievable} (centered data has numerical rank {numerical_rank})",
            achievable=achievable)

    ones = np.ones((cols, 1))
    basis = np.hstack([ones, res.u[:, : r - 1]]) if r > 1 else ones
    u = orthonormalize(basis)
    s = pinv(drop_last_row(u)) @ drop_first_row(u)
    return PccaContext(m=data.copy(), u=u, s=s, rank=r)
