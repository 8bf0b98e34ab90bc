"""Synthetic time-resolved reaction data: first-order kinetics from a rate
matrix, component spectra as sums of Lorentzian peaks with adjustable
interference, their product as the measurement matrix, and seeded
half-normal noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import check_matrix, expm

# Five-species first-order scheme used by the shipped default dataset:
# A feeds B, B feeds C and D, C and E exchange, D only absorbs.
DEFAULT_RATE_MATRIX = (
    (-0.53, 0.53, 0.00, 0.00, 0.00),
    (0.02, -0.66, 0.43, 0.21, 0.00),
    (0.00, 0.25, -0.36, 0.00, 0.11),
    (0.00, 0.00, 0.00, 0.00, 0.00),
    (0.00, 0.00, 0.10, 0.00, -0.10),
)

_CONSERVATION_TOL = 1e-12


@dataclass(frozen=True)
class Peak:
    """One Lorentzian: ``amplitude / (1 + ((x - center) / width)**2)``."""

    center: float
    amplitude: float
    width: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"peak amplitude must be > 0, got {self.amplitude}")
        if not self.width > 0:
            raise ValueError(f"peak width must be > 0, got {self.width}")


PeakList = Sequence[Sequence[Peak]]


@dataclass(frozen=True)
class ReactionSpec:
    """First-order reaction: rate matrix, initial concentrations, time grid."""

    k: np.ndarray
    h0: np.ndarray
    t_grid: np.ndarray

    def __post_init__(self):
        k = check_matrix(self.k, "rate matrix")
        if k.shape[0] != k.shape[1]:
            raise ValueError(f"rate matrix must be square, got {k.shape}")
        if np.abs(k.sum(axis=1)).max() > _CONSERVATION_TOL:
            raise ValueError("rate matrix rows must sum to zero")
        off_diag = k - np.diag(np.diag(k))
        if off_diag.min() < 0:
            raise ValueError("rate matrix off-diagonal entries must be >= 0")
        if np.diag(k).max() > 0:
            raise ValueError("rate matrix diagonal entries must be <= 0")
        h0 = np.asarray(self.h0, dtype=float).ravel()
        if h0.size != k.shape[0]:
            raise ValueError(f"h0 length {h0.size} does not match rate matrix {k.shape}")
        if h0.min() < 0:
            raise ValueError("initial concentrations must be >= 0")
        if abs(h0.sum() - 1.0) > _CONSERVATION_TOL:
            raise ValueError("initial concentrations must sum to 1")
        t = np.asarray(self.t_grid, dtype=float).ravel()
        if t.size < 1 or not np.isfinite(t).all():
            raise ValueError("time grid must be non-empty and finite")
        if t.size > 1:
            steps = np.diff(t)
            if steps.min() < 0:
                raise ValueError("time grid must be non-decreasing")
            if steps.max() - steps.min() > 1e-9 * max(steps.max(), 1.0):
                raise ValueError("time grid must be equidistant")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "t_grid", t)
        for arr in (self.k, self.h0, self.t_grid):
            arr.setflags(write=False)

    @property
    def species(self) -> int:
        return self.k.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    """Half-normal additive noise of scale ``delta``, seeded."""

    delta: float
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ValueError(f"noise delta must be finite and >= 0, got {self.delta}")


def kinetics(spec: ReactionSpec) -> np.ndarray:
    """Relative concentrations over time, one column per timestep.

    Column j is the initial concentration vector propagated through the
    rate-matrix exponential at time t_j; columns stay on the probability
    simplex because the rate matrix conserves mass.
    """
    columns = [spec.h0 @ expm(spec.k * t) for t in spec.t_grid]
    return np.column_stack(columns)


def markov_kinetics(p, h0, steps: int) -> np.ndarray:
    """Concentrations propagated by a one-step transition matrix.

    Column 0 is ``h0``; column j is column j-1 advanced by ``p`` (as a row
    vector product). Useful for building datasets with a known transition
    matrix instead of a rate matrix.
    """
    transition = check_matrix(p, "transition matrix")
    r = transition.shape[0]
    if transition.shape != (r, r):
        raise ValueError(f"transition matrix must be square, got {transition.shape}")
    start = np.asarray(h0, dtype=float).ravel()
    if start.size != r:
        raise ValueError(f"h0 length {start.size} does not match transition matrix")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    out = np.empty((r, steps))
    current = start
    for j in range(steps):
        out[:, j] = current
        current = current @ transition
    return out


def spectra(peaks: PeakList, grid) -> np.ndarray:
    """Evaluate per-species Lorentzian sums on a wavenumber grid.

    Returns one column per species; entries are strictly positive because
    Lorentzian tails never vanish.
    """
    x = np.asarray(grid, dtype=float).ravel()
    if x.size < 1 or not np.isfinite(x).all():
        raise ValueError("wavenumber grid must be non-empty and finite")
    if x.size > 1 and np.diff(x).min() <= 0:
        raise ValueError("wavenumber grid must be strictly increasing")
    if len(peaks) == 0:
        raise ValueError("need at least one species")
    out = np.zeros((x.size, len(peaks)))
    for s, species_peaks in enumerate(peaks):
        if len(species_peaks) == 0:
            raise ValueError(f"species {s} has an empty peak list")
        for peak in species_peaks:
            out[:, s] += peak.amplitude / (1.0 + ((x - peak.center) / peak.width) ** 2)
    return out


def interfere(peaks: PeakList, focals, strength: float) -> list[list[Peak]]:
    """Move every peak center toward its nearest focal point.

    ``strength`` 0 leaves peaks untouched, 1 collapses each center onto its
    nearest focal point; ties resolve toward the lower focal value.
    """
    focal_points = np.sort(np.asarray(focals, dtype=float).ravel())
    if focal_points.size == 0:
        raise ValueError("need at least one focal point")
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"interference strength must lie in [0, 1], got {strength}")
    moved = []
    for species_peaks in peaks:
        new_peaks = []
        for peak in species_peaks:
            nearest = focal_points[np.argmin(np.abs(focal_points - peak.center))]
            center = (1.0 - strength) * peak.center + strength * nearest
            new_peaks.append(Peak(center=center, amplitude=peak.amplitude,
                                  width=peak.width))
        moved.append(new_peaks)
    return moved


def compose(w, h) -> np.ndarray:
    """Measurement matrix as the product of spectra and kinetics."""
    wa = check_matrix(w, "spectra matrix")
    ha = check_matrix(h, "kinetics matrix")
    if wa.shape[1] != ha.shape[0]:
        raise ValueError(f"inner dimensions disagree: {wa.shape} vs {ha.shape}")
    return wa @ ha


def add_noise(m, noise: NoiseSpec) -> np.ndarray:
    """Disturb measurements by seeded half-normal noise: m + delta * |N(0,1)|."""
    data = check_matrix(m, "measurement matrix")
    if noise.delta == 0.0:
        return data.copy()
    rng = np.random.default_rng(noise.seed)
    return data + noise.delta * np.abs(rng.standard_normal(data.shape))


def random_peaks(rng: np.random.Generator, species: int, grid_span: tuple[float, float],
                 count_range: tuple[int, int] = (3, 6),
                 amplitude_range: tuple[float, float] = (0.5, 2.0),
                 width_range: tuple[float, float] = (8.0, 30.0)) -> list[list[Peak]]:
    """Draw seeded random peak lists, one list per species.

    Centers stay inside the middle 90% of the grid span so peak maxima fall
    on-grid even after modest interference shifts.
    """
    lo, hi = grid_span
    if not hi > lo:
        raise ValueError(f"grid span must be increasing, got {grid_span}")
    margin = 0.05 * (hi - lo)
    peaks = []
    for _ in range(species):
        count = int(rng.integers(count_range[0], count_range[1] + 1))
        species_peaks = []
        for _ in range(count):
            species_peaks.append(Peak(
                center=float(rng.uniform(lo + margin, hi - margin)),
                amplitude=float(rng.uniform(*amplitude_range)),
                width=float(rng.uniform(*width_range)),
            ))
        peaks.append(species_peaks)
    return peaks
