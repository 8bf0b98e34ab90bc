"""Initial transformation matrix: inner-simplex vertex selection followed
by a volume-maximizing feasibility refinement.

The rows of the orthonormal basis are points in rank-dimensional space;
the most mutually distant rows serve as simplex vertices. Inverting the
vertex submatrix yields a transformation whose induced concentration
matrix is exactly the identity at the vertex timesteps but typically
negative elsewhere (the vertex simplex sits inside the data cloud).

:func:`refine_transform` then grows that simplex to the largest volume
whose implied spectra stay non-negative and shifts each face to touch the
data, which restores the initialization contract the downstream penalty
minimization needs: non-negative, column-stochastic memberships close to
the identifiable factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .numerics import NumericalError, check_matrix, svd
from .preprocess import PccaContext


class DegenerateSpanError(NumericalError):
    """All remaining rows lie in the affine span of the chosen vertices."""


class SingularVertexError(NumericalError):
    """The selected vertex rows form a (numerically) singular matrix."""


_SPAN_TOL = 1e-12


@dataclass(frozen=True)
class SimplexInit:
    """Vertex selection result with conditioning diagnostics.

    ``condition`` is the 2-norm condition number of the vertex submatrix;
    ``h_min`` the smallest entry of the induced concentration matrix
    (negative values mean data outside the initial simplex).
    """

    vertex_indices: tuple[int, ...]
    a_init: np.ndarray
    condition: float
    h_min: float

    def __post_init__(self):
        self.a_init.setflags(write=False)


def inner_simplex_indices(u) -> list[int]:
    """Pick rank-many row indices by greedy farthest-point selection.

    The first index maximizes the row norm; every further index maximizes
    the distance to the affine span of the rows chosen so far, computed
    through orthogonal projection residuals. Ties resolve to the lowest
    row index.
    """
    arr = check_matrix(u, "basis matrix")
    m, r = arr.shape
    if m < r:
        raise ValueError(f"need at least {r} rows to pick {r} vertices, got {m}")

    chosen = [int(np.argmax(np.linalg.norm(arr, axis=1)))]
    origin = arr[chosen[0]]
    directions = np.zeros((r, 0))
    for _ in range(1, r):
        offsets = arr - origin
        residuals = offsets - (offsets @ directions) @ directions.T
        dist = np.linalg.norm(residuals, axis=1)
        dist[chosen] = -np.inf
        pick = int(np.argmax(dist))
        if dist[pick] < _SPAN_TOL:
            raise DegenerateSpanError(
                f"rows collapse onto a {directions.shape[1]}-dimensional "
                f"affine span (max residual {dist[pick]:.3e}); cannot place "
                f"{r} simplex vertices")
        chosen.append(pick)
        new_dir = residuals[pick] / dist[pick]
        directions = np.hstack([directions, new_dir[:, None]])
    return chosen


def initial_transform(u, idx) -> SimplexInit:
    """Invert the vertex rows of ``u`` to get the starting transformation."""
    arr = check_matrix(u, "basis matrix")
    indices = [int(i) for i in idx]
    r = arr.shape[1]
    if len(indices) != r:
        raise ValueError(f"need exactly {r} vertex indices, got {len(indices)}")
    if len(set(indices)) != len(indices):
        raise ValueError(f"vertex indices must be distinct, got {indices}")
    if min(indices) < 0 or max(indices) >= arr.shape[0]:
        raise ValueError(f"vertex indices out of range [0, {arr.shape[0]})")

    vertices = arr[indices, :]
    spectrum = svd(vertices).sigma
    if spectrum[-1] <= r * np.finfo(float).eps * spectrum[0]:
        raise SingularVertexError(
            f"vertex rows {indices} are numerically singular "
            f"(sigma_min={spectrum[-1]:.3e}, sigma_max={spectrum[0]:.3e})")
    a_init = np.linalg.solve(vertices, np.eye(r))
    h = (arr @ a_init).T
    return SimplexInit(
        vertex_indices=tuple(indices),
        a_init=a_init,
        condition=float(spectrum[0] / spectrum[-1]),
        h_min=float(h.min()),
    )


def _touch_shift(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Translate every simplex face until it touches the data cloud.

    Shifts each membership coordinate by its extreme value and renormalizes,
    so the smallest entry of every membership row becomes exactly zero while
    column sums stay at one. Returns ``a`` unchanged when the shift would
    degenerate (membership minima summing to one or more, e.g. rank 1).
    """
    h = (u @ a).T
    lam = -h.min(axis=1)
    scale = 1.0 + lam.sum()
    if scale <= np.finfo(float).eps:
        return a
    r = a.shape[0]
    mix = (np.eye(r) + np.outer(lam, np.ones(r))) / scale
    return a @ mix.T


def refine_transform(a_init, ctx: PccaContext, max_sweeps: int = 8) -> np.ndarray:
    """Grow the initial simplex to maximal volume under non-negative spectra.

    Works in the dual parametrization ``b = inv(a).T``, where the implied
    spectra are linear (``(m @ u) @ b``) and the column-sum-one condition is
    a linear equality, so the simplex volume ``|det b|`` can be maximized by
    cycling linear programs over the columns of ``b`` (the determinant is
    linear in each column). Afterwards every face is translated back onto
    the data cloud so the returned transformation yields memberships that
    are non-negative, column stochastic, and tight around the measurements.

    Column updates that fail or do not increase the volume are skipped, so
    the result never degrades below the starting volume; with no usable
    update the (face-shifted) initialization is returned unchanged.
    """
    r = ctx.rank
    a = check_matrix(a_init, "initial transformation")
    if a.shape != (r, r):
        raise ValueError(f"transformation must be {r}x{r}, got {a.shape}")
    ones_weight = ctx.u.T @ np.ones(ctx.u.shape[0])
    spectra_map = ctx.m @ ctx.u
    b = np.linalg.inv(a.T)
    n_channels = spectra_map.shape[0]
    last_volume = abs(np.linalg.det(b))
    for _ in range(max_sweeps):
        for j in range(r):
            det = np.linalg.det(b)
            if det == 0.0:
                break
            # det is linear in column j; its gradient is the cofactor column.
            cofactor = np.linalg.inv(b).T[:, j] * det
            result = linprog(-np.sign(det) * cofactor,
                             A_ub=-spectra_map, b_ub=np.zeros(n_channels),
                             A_eq=ones_weight[None, :], b_eq=[1.0],
                             bounds=[(None, None)] * r, method="highs")
            if result.status != 0 or not np.isfinite(result.x).all():
                continue
            candidate = b.copy()
            candidate[:, j] = result.x
            if abs(np.linalg.det(candidate)) >= abs(np.linalg.det(b)):
                b = candidate
        volume = abs(np.linalg.det(b))
        if volume <= last_volume * (1.0 + 1e-12):
            break
        last_volume = volume
    return _touch_shift(np.linalg.inv(b.T), ctx.u)
