"""Candidate factor assembly and the five-term penalty objective.

A candidate transformation matrix turns the preprocessed basis into trial
spectra W, kinetics H and transition matrix P. The objective scores how
far those trial factors are from the structural requirements: W, H, P
entrywise non-negative, H column stochastic, P row stochastic. The
optimizer minimizes the squared penalty sum over the transformation's
entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import NumericalError, check_matrix, pinv, svd
from .preprocess import PccaContext


class SingularTransformError(NumericalError):
    """Candidate transformation matrix is numerically singular."""


@dataclass(frozen=True)
class PenaltyWeights:
    """Coefficients of the five penalty terms.

    No sign is enforced: negative weights on the minimum-entry terms turn
    them into penalties for negative entries, positive weights reward
    driving the minima to zero from above. Both regimes are in use.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    mu: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "mu"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"weight {name} must be finite, got {value}")


@dataclass(frozen=True)
class CandidateFactors:
    """Trial factors (w: n-by-r spectra, h: r-by-m kinetics, p: r-by-r transitions)."""

    w: np.ndarray
    h: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class PenaltyBreakdown:
    """The five weighted penalty terms, their sum and its square."""

    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    psi: float
    psi_squared: float

    def to_dict(self) -> dict:
        return {
            "p1_w_min": self.p1,
            "p2_h_min": self.p2,
            "p3_h_colsum_dev": self.p3,
            "p4_p_min": self.p4,
            "p5_p_rowsum_dev": self.p5,
            "psi": self.psi,
            "psi_squared": self.psi_squared,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PenaltyBreakdown":
        return cls(
            p1=data["p1_w_min"], p2=data["p2_h_min"],
            p3=data["p3_h_colsum_dev"], p4=data["p4_p_min"],
            p5=data["p5_p_rowsum_dev"], psi=data["psi"],
            psi_squared=data["psi_squared"],
        )


def assemble(a, ctx: PccaContext) -> CandidateFactors:
    """Build trial factors from a candidate transformation matrix.

    ``h = (u @ a).T``, ``w = m @ pinv(h)``, and ``p`` is the shift operator
    conjugated by ``a`` (equal to the pseudoinverse-based one-step estimate
    because the basis columns are orthonormal, but using the precomputed
    operator keeps this cheap inside the optimizer loop).

    Raises :class:`SingularTransformError` for numerically singular ``a``;
    the optimizer treats that as an infinite objective value.
    """
    r = ctx.rank
    arr = check_matrix(a, "transformation matrix")
    if arr.shape != (r, r):
        raise ValueError(f"transformation must be {r}x{r}, got {arr.shape}")
    spectrum = svd(arr).sigma
    if spectrum[-1] <= r * np.finfo(float).eps * spectrum[0] or spectrum[0] == 0.0:
        raise SingularTransformError(
            f"candidate transformation is numerically singular "
            f"(sigma_min={spectrum[-1]:.3e}, sigma_max={spectrum[0]:.3e})")
    h = (ctx.u @ arr).T
    w = ctx.m @ pinv(h)
    p = np.linalg.solve(arr, ctx.s @ arr)
    return CandidateFactors(w=w, h=h, p=p)


def penalties(factors: CandidateFactors, weights: PenaltyWeights) -> PenaltyBreakdown:
    """Score trial factors against the five structural requirements."""
    p1 = weights.alpha * float(factors.w.min())
    p2 = weights.beta * float(factors.h.min())
    p3 = weights.gamma * float(np.abs(factors.h.sum(axis=0) - 1.0).max())
    p4 = weights.delta * float(factors.p.min())
    p5 = weights.mu * float(np.abs(factors.p.sum(axis=1) - 1.0).max())
    psi = p1 + p2 + p3 + p4 + p5
    return PenaltyBreakdown(p1=p1, p2=p2, p3=p3, p4=p4, p5=p5,
                            psi=psi, psi_squared=psi * psi)


def psi(a, weights: PenaltyWeights, ctx: PccaContext) -> PenaltyBreakdown:
    """Assemble factors for ``a`` and evaluate the penalty breakdown."""
    return penalties(assemble(a, ctx), weights)


def psi_squared_fn(weights: PenaltyWeights, ctx: PccaContext) -> Callable[[np.ndarray], float]:
    """Adapter exposing the squared penalty sum over flattened candidates.

    The returned function accepts a length ``rank**2`` vector (row-major
    flattening) and maps singular candidates to ``+inf`` so derivative-free
    search simply rejects them.
    """
    r = ctx.rank

    def objective(x: np.ndarray) -> float:
        a = np.asarray(x, dtype=float).reshape(r, r)
        try:
            return psi(a, weights, ctx).psi_squared
        except SingularTransformError:
            return math.inf

    return objective
