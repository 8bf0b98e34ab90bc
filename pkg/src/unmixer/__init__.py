"""Spectral unmixing of time-resolved measurements without the
separability assumption: penalty-objective matrix factorization with
Markov transition recovery, plus a synthetic data generator and an
evaluation harness.
"""

from .metrics import MatchReport, align_transition, match_components, report
from .numerics import expm, orthonormalize, pearson, pinv, svd
from .objective import PenaltyBreakdown, PenaltyWeights, assemble, psi
from .optimizer import NmOptions, NmResult, nelder_mead
from .pcca import (SimplexInit, initial_transform, inner_simplex_indices,
                   refine_transform)
from .pipeline import Factorization, factorize, recover
from .preprocess import PccaContext, build_context
from .synth import (DEFAULT_RATE_MATRIX, NoiseSpec, Peak, ReactionSpec,
                    add_noise, compose, interfere, kinetics, markov_kinetics,
                    random_peaks, spectra)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RATE_MATRIX", "Factorization", "MatchReport", "NmOptions",
    "NmResult", "NoiseSpec", "Peak", "PccaContext", "PenaltyBreakdown",
    "PenaltyWeights", "ReactionSpec", "SimplexInit", "add_noise",
    "align_transition", "assemble", "build_context", "compose", "expm",
    "factorize", "initial_transform", "inner_simplex_indices", "interfere",
    "kinetics", "markov_kinetics", "match_components", "nelder_mead",
    "orthonormalize", "pearson", "pinv", "psi", "random_peaks", "recover",
    "refine_transform",
    "report", "spectra", "svd",
]
