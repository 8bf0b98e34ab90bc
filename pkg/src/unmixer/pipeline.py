"""End-to-end factorization: preprocess, simplex initialization, penalty
minimization, factor recovery, optional multi-start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import NumericalError
from .objective import PenaltyBreakdown, PenaltyWeights, assemble, psi, psi_squared_fn
from .optimizer import NmOptions, NmResult, OptimizerError, nelder_mead
from .pcca import initial_transform, inner_simplex_indices, refine_transform
from .preprocess import PccaContext, build_context


class FactorizationError(NumericalError):
    """Every restart failed; the message lists the individual causes."""


@dataclass(frozen=True)
class Factorization:
    """Recovered factors plus diagnostics.

    ``w_rec @ h_rec`` approximates the input data; ``p_rec`` advances
    kinetics columns by one timestep. All three are recomputable from
    ``a_opt`` and the preprocessing context. ``residual`` is the relative
    Frobenius reconstruction error of the stored factors.
    """

    w_rec: np.ndarray
    h_rec: np.ndarray
    p_rec: np.ndarray
    a_opt: np.ndarray
    breakdown: PenaltyBreakdown
    optimizer: NmResult
    residual: float

    def __post_init__(self):
        for arr in (self.w_rec, self.h_rec, self.p_rec, self.a_opt):
            arr.setflags(write=False)


def recover(a_opt, ctx: PccaContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Apply the recovery formulas to an optimized transformation matrix.

    Identical arithmetic to the objective's factor assembly, so recovery
    reproduces what the optimizer scored, bit for bit.
    """
    factors = assemble(a_opt, ctx)
    return factors.w, factors.h, factors.p


def project_feasible_kinetics(h) -> np.ndarray:
    """Clamp negative kinetics entries to zero and renormalize column sums."""
    clamped = np.clip(np.asarray(h, dtype=float), 0.0, None)
    sums = clamped.sum(axis=0)
    if np.any(sums <= 0):
        raise FactorizationError(
            "cannot renormalize kinetics: a column clamped to all zeros")
    return clamped / sums


def factorize(m, r: int, weights: PenaltyWeights,
              opts: NmOptions | None = None, restarts: int = 1,
              seed: int = 0, project_feasible: bool = False) -> Factorization:
    """Run the full factorization and return the best restart.

    The starting transformation is the inner-simplex initialization after
    the volume-maximizing feasibility refinement (without the refinement
    the penalty minimizer reliably stalls far from a usable factorization).
    Restart 0 begins there; each further restart perturbs the start
    entrywise by seeded multiplicative factors in [0.9, 1.1]. The restart
    with the smallest final objective wins, ties broken by restart index.
    With ``project_feasible`` the returned kinetics are clamped and
    renormalized (the raw optimizer output is the default; slight
    infeasibilities are expected and informative).
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    ctx = build_context(m, r)
    idx = inner_simplex_indices(ctx.u)
    init = initial_transform(ctx.u, idx)
    # Refine only when the vertex simplex fails to contain the data. On
    # separable data the inner simplex is already the answer and volume
    # growth would only walk it away from the true vertices.
    if init.h_min < -1e-9:
        a_start = refine_transform(init.a_init, ctx)
    else:
        a_start = init.a_init
    fn = psi_squared_fn(weights, ctx)

    rng = np.random.default_rng(seed)
    starts = [a_start.reshape(-1)]
    for _ in range(restarts - 1):
        perturbation = rng.uniform(0.9, 1.1, size=(r, r))
        starts.append((a_start * perturbation).reshape(-1))

    results: list[tuple[int, NmResult]] = []
    failures: list[str] = []
    for index, x0 in enumerate(starts):
        try:
            results.append((index, nelder_mead(fn, x0, opts)))
        except OptimizerError as exc:
            failures.append(f"restart {index}: {exc}")
    if not results:
        raise FactorizationError(
            "all restarts failed: " + "; ".join(failures))

    best_index, best = min(results, key=lambda item: (item[1].f_opt, item[0]))
    a_opt = best.x_opt.reshape(r, r)
    w_rec, h_rec, p_rec = recover(a_opt, ctx)
    if project_feasible:
        h_rec = project_feasible_kinetics(h_rec)
    breakdown = psi(a_opt, weights, ctx)
    norm_m = float(np.linalg.norm(ctx.m))
    residual = float(np.linalg.norm(ctx.m - w_rec @ h_rec)) / norm_m if norm_m else 0.0
    return Factorization(w_rec=w_rec, h_rec=h_rec, p_rec=p_rec, a_opt=a_opt,
                         breakdown=breakdown, optimizer=best,
                         residual=residual)
