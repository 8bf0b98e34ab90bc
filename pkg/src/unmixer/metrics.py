"""Recovery-quality evaluation: correlation-based component matching
against ground truth, reconstruction residuals, and feasibility deviations
of the recovered factors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .numerics import ZeroVarianceError, check_matrix, pearson
from .pipeline import Factorization

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchReport:
    """Quality summary for one factorization.

    ``permutation`` maps recovered component index to true component index
    (``None`` without ground truth, as are ``correlations`` and
    ``kinetics_rmse``). ``min_entries`` is ``(min W, min H, min P)``.
    """

    permutation: tuple[int, ...] | None
    correlations: tuple[float, ...] | None
    kinetics_rmse: tuple[float, ...] | None
    residual: float
    h_colsum_dev: float
    min_entries: tuple[float, float, float]
    p_rowsum_dev: float

    def to_dict(self) -> dict:
        return {
            "permutation": list(self.permutation) if self.permutation is not None else None,
            "correlations": list(self.correlations) if self.correlations is not None else None,
            "kinetics_rmse": list(self.kinetics_rmse) if self.kinetics_rmse is not None else None,
            "residual": self.residual,
            "h_colsum_dev": self.h_colsum_dev,
            "min_entries": {
                "w": self.min_entries[0],
                "h": self.min_entries[1],
                "p": self.min_entries[2],
            },
            "p_rowsum_dev": self.p_rowsum_dev,
        }


def correlation_matrix(w_rec, w_true) -> np.ndarray:
    """Pearson correlations between recovered and true spectral columns.

    Entry (i, j) correlates recovered column i with true column j. Pairs
    involving a zero-variance column get correlation -1 and a logged
    warning so they lose every matchup instead of aborting the evaluation.
    """
    rec = check_matrix(w_rec, "recovered spectra")
    true = check_matrix(w_true, "true spectra")
    if rec.shape != true.shape:
        raise ValueError(f"shape mismatch: {rec.shape} vs {true.shape}")
    r = rec.shape[1]
    corr = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            try:
                corr[i, j] = pearson(rec[:, i], true[:, j])
            except ZeroVarianceError:
                log.warning("zero-variance column in correlation of recovered "
                            "component %d with true component %d; scoring as -1", i, j)
                corr[i, j] = -1.0
    return corr


def match_components(w_rec, w_true) -> list[int]:
    """Assign recovered components to true ones by maximal total correlation.

    Returns a permutation: entry i is the true component matched to
    recovered component i. Solved as an optimal linear assignment, which is
    the bijective reading of matching by maximal correlation.
    """
    corr = correlation_matrix(w_rec, w_true)
    rows, cols = linear_sum_assignment(-corr)
    permutation = [0] * len(rows)
    for i, j in zip(rows, cols):
        permutation[i] = int(j)
    return permutation


def align_transition(p_rec, permutation) -> np.ndarray:
    """Relabel a recovered transition matrix into true component indices."""
    p = check_matrix(p_rec, "recovered transition matrix")
    perm = list(permutation)
    aligned = np.empty_like(p)
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            aligned[perm[i], perm[j]] = p[i, j]
    return aligned


def report(fact: Factorization, truth=None) -> MatchReport:
    """Build the full quality report for a factorization.

    ``truth`` is an optional ``(w_true, h_true, p_true)`` triple; without
    it the matching fields stay ``None``. Kinetics errors use the spectral
    matching (components are identified by their spectra, and the kinetics
    inherit that assignment).
    """
    permutation = None
    correlations = None
    kinetics_rmse = None
    if truth is not None:
        w_true, h_true, _ = truth
        corr = correlation_matrix(fact.w_rec, w_true)
        permutation = match_components(fact.w_rec, w_true)
        correlations = tuple(float(corr[i, permutation[i]])
                             for i in range(len(permutation)))
        h_true = check_matrix(h_true, "true kinetics")
        if h_true.shape != fact.h_rec.shape:
            raise ValueError(f"kinetics shape mismatch: {fact.h_rec.shape} "
                             f"vs {h_true.shape}")
        kinetics_rmse = tuple(
            float(np.sqrt(np.mean((fact.h_rec[i] - h_true[permutation[i]]) ** 2)))
            for i in range(len(permutation)))
    return MatchReport(
        permutation=tuple(permutation) if permutation is not None else None,
        correlations=correlations,
        kinetics_rmse=kinetics_rmse,
        residual=fact.residual,
        h_colsum_dev=float(np.abs(fact.h_rec.sum(axis=0) - 1.0).max()),
        min_entries=(float(fact.w_rec.min()), float(fact.h_rec.min()),
                     float(fact.p_rec.min())),
        p_rowsum_dev=float(np.abs(fact.p_rec.sum(axis=1) - 1.0).max()),
    )
