"""Derivative-free Nelder-Mead simplex minimization.

Follows the Lagarias et al. scheme as popularized by MATLAB's fminsearch:
5% relative initial perturbations (0.00025 absolute at zero coordinates),
reflection/expansion/contraction/shrink with the standard coefficients,
and termination only when both the simplex diameter and the function-value
spread fall below their tolerances. Objective values of ``+inf`` act as
rejections; ``NaN`` is a hard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OptimizerError(RuntimeError):
    """Base class for optimizer failures."""


class BadInitialPointError(OptimizerError):
    """The objective is infinite at the starting point."""


class NanObjectiveError(OptimizerError):
    """The objective returned NaN; carries the offending point."""

    def __init__(self, message: str, point: np.ndarray):
        super().__init__(message)
        self.point = point


@dataclass
class NmOptions:
    """Nelder-Mead controls; ``None`` budgets resolve to ``200 * dim``."""

    max_iter: int | None = None
    max_feval: int | None = None
    tol_x: float = 1e-6
    tol_f: float = 1e-8
    initial_step: float = 0.05
    zero_step: float = 0.00025
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5

    def __post_init__(self):
        if self.tol_x <= 0 or self.tol_f <= 0:
            raise ValueError("tolerances must be positive")
        if self.reflection <= 0:
            raise ValueError("reflection coefficient must be positive")
        if self.expansion <= self.reflection:
            raise ValueError("expansion must exceed reflection")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")

    def resolved_budgets(self, dim: int) -> tuple[int, int]:
        max_iter = self.max_iter if self.max_iter is not None else 200 * dim
        max_feval = self.max_feval if self.max_feval is not None else 200 * dim
        return max_iter, max_feval


@dataclass
class NmResult:
    x_opt: np.ndarray
    f_opt: float
    iterations: int
    fevals: int
    converged_on: str

    def to_dict(self) -> dict:
        return {
            "f_opt": self.f_opt,
            "iterations": self.iterations,
            "fevals": self.fevals,
            "converged_on": self.converged_on,
        }


def nelder_mead(f, x0, opts: NmOptions | None = None) -> NmResult:
    """Minimize ``f`` from ``x0`` with the Nelder-Mead simplex method.

    Deterministic given identical inputs: vertex ordering is a stable sort
    by value with insertion order breaking ties, so reruns reproduce the
    same trajectory bit for bit.
    """
    opts = opts if opts is not None else NmOptions()
    start = np.asarray(x0, dtype=float).ravel().copy()
    if not np.isfinite(start).all():
        raise ValueError("starting point must be finite")
    dim = start.size
    max_iter, max_feval = opts.resolved_budgets(dim)

    fevals = 0

    def evaluate(x: np.ndarray) -> float:
        nonlocal fevals
        fevals += 1
        value = float(f(x))
        if math.isnan(value):
            raise NanObjectiveError(f"objective returned NaN at {x!r}", point=x.copy())
        return value

    f0 = evaluate(start)
    if math.isinf(f0):
        raise BadInitialPointError("objective is infinite at the starting point")

    vertices = [start]
    values = [f0]
    for i in range(dim):
        point = start.copy()
        if point[i] != 0.0:
            point[i] *= 1.0 + opts.initial_step
        else:
            point[i] = opts.zero_step
        vertices.append(point)
        values.append(evaluate(point))
    ages = list(range(dim + 1))
    next_age = dim + 1

    def order() -> None:
        ranking = sorted(range(dim + 1), key=lambda i: (values[i], ages[i]))
        vertices[:] = [vertices[i] for i in ranking]
        values[:] = [values[i] for i in ranking]
        ages[:] = [ages[i] for i in ranking]

    def replace_worst(point: np.ndarray, value: float) -> None:
        nonlocal next_age
        vertices[-1] = point
        values[-1] = value
        ages[-1] = next_age
        next_age += 1

    iterations = 0
    converged_on = None
    while True:
        order()
        diameter = max(np.max(np.abs(v - vertices[0])) for v in vertices[1:])
        spread = max(abs(fv - values[0]) for fv in values[1:])
        if diameter <= opts.tol_x and spread <= opts.tol_f:
            # Both criteria are required; report the binding one.
            converged_on = "tol_x" if diameter / opts.tol_x >= spread / opts.tol_f else "tol_f"
            break
        if iterations >= max_iter:
            converged_on = "max_iter"
            break
        if fevals >= max_feval:
            converged_on = "max_feval"
            break

        centroid = np.mean(vertices[:-1], axis=0)
        worst = vertices[-1]
        reflected = centroid + opts.reflection * (centroid - worst)
        f_reflected = evaluate(reflected)

        if f_reflected < values[0]:
            expanded = centroid + opts.reflection * opts.expansion * (centroid - worst)
            f_expanded = evaluate(expanded)
            if f_expanded < f_reflected:
                replace_worst(expanded, f_expanded)
            else:
                replace_worst(reflected, f_reflected)
        elif f_reflected < values[-2]:
            replace_worst(reflected, f_reflected)
        elif f_reflected < values[-1]:
            contracted = centroid + opts.contraction * opts.reflection * (centroid - worst)
            f_contracted = evaluate(contracted)
            if f_contracted <= f_reflected:
                replace_worst(contracted, f_contracted)
            else:
                _shrink_simplex(vertices, values, ages, opts, evaluate)
                next_age = max(ages) + 1
        else:
            contracted = centroid - opts.contraction * (centroid - worst)
            f_contracted = evaluate(contracted)
            if f_contracted < values[-1]:
                replace_worst(contracted, f_contracted)
            else:
                _shrink_simplex(vertices, values, ages, opts, evaluate)
                next_age = max(ages) + 1
        iterations += 1

    order()
    return NmResult(x_opt=vertices[0].copy(), f_opt=values[0],
                    iterations=iterations, fevals=fevals,
                    converged_on=converged_on)


def _shrink_simplex(vertices, values, ages, opts, evaluate) -> None:
    """Pull every vertex toward the best one; the best vertex is untouched."""
    best = vertices[0]
    age = max(ages)
    for i in range(1, len(vertices)):
        vertices[i] = best + opts.shrink * (vertices[i] - best)
        values[i] = evaluate(vertices[i])
        age += 1
        ages[i] = age
