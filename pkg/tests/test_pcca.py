import numpy as np
import pytest

from oracles import max_volume_subset
from unmixer.pcca import (DegenerateSpanError, SingularVertexError,
                          initial_transform, inner_simplex_indices,
                          refine_transform)
from unmixer.preprocess import build_context

RNG = np.random.default_rng(5)


def simplex_cloud(r, interior=20, seed=3):
    """Unit-vector rows plus random convex combinations of them."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(r) * 2.0, size=interior)
    return np.vstack([np.eye(r), weights])


class TestInnerSimplexIndices:
    def test_unit_vertices_win(self):
        u = simplex_cloud(4)
        idx = inner_simplex_indices(u)
        assert sorted(idx) == [0, 1, 2, 3]

    def test_square_invertible_returns_all_rows(self):
        u = RNG.standard_normal((4, 4)) + 4 * np.eye(4)
        idx = inner_simplex_indices(u)
        assert sorted(idx) == [0, 1, 2, 3]

    def test_degenerate_rows_fail(self):
        row = RNG.standard_normal(3)
        u = np.vstack([row, 2 * row, 3 * row, -row])  # collinear rows
        with pytest.raises(DegenerateSpanError):
            inner_simplex_indices(u)

    def test_matches_exhaustive_volume_on_vertex_cloud(self):
        # with actual simplex vertices present, greedy selection finds the
        # same maximal-volume subset as exhaustive search
        for r in (3, 4, 5):
            u = simplex_cloud(r, interior=15 - r)
            greedy = inner_simplex_indices(u)
            exhaustive = max_volume_subset(u, r)
            assert sorted(greedy) == sorted(exhaustive)

    def test_near_optimal_volume_on_trajectory(self, small_dataset):
        # smooth-trajectory rows have no exact vertices; greedy stays within
        # a fixed factor of the exhaustive maximal simplex volume
        # (0.7 frozen from the oracle runs on these subsamples)
        for r, step in [(2, 4), (3, 4), (4, 5)]:
            ctx = build_context(small_dataset["m"], r)
            sub = ctx.u[::step, :]
            assert sub.shape[0] <= 20
            greedy = inner_simplex_indices(sub)
            exhaustive = max_volume_subset(sub, r)
            vol_greedy = abs(np.linalg.det(sub[greedy, :]))
            vol_best = abs(np.linalg.det(sub[list(exhaustive), :]))
            assert vol_greedy >= 0.7 * vol_best

    def test_deterministic(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        assert inner_simplex_indices(ctx.u) == inner_simplex_indices(ctx.u)


class TestInitialTransform:
    def test_identity_on_pure_simplex(self):
        u = simplex_cloud(3)
        init = initial_transform(u, [0, 1, 2])
        np.testing.assert_allclose(init.a_init, np.eye(3), atol=1e-12)
        h = (u @ init.a_init).T
        np.testing.assert_allclose(h, u.T, atol=1e-12)

    def test_vertex_rows_become_identity(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        idx = inner_simplex_indices(ctx.u)
        init = initial_transform(ctx.u, idx)
        np.testing.assert_allclose((ctx.u @ init.a_init)[idx, :], np.eye(5),
                                   atol=1e-10)

    def test_column_sums_near_one(self, small_dataset):
        # the constant basis column makes membership columns sum to one at
        # every timestep, not just the vertices
        ctx = build_context(small_dataset["m"], 5)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        h = (ctx.u @ init.a_init).T
        assert np.abs(h.sum(axis=0) - 1.0).max() <= 0.1

    def test_each_membership_row_peaks_high(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        h = (ctx.u @ init.a_init).T
        assert np.all(h.max(axis=1) >= 0.9)

    def test_determinant_matches_vertex_volume(self, small_dataset):
        ctx = build_context(small_dataset["m"], 4)
        idx = inner_simplex_indices(ctx.u)
        init = initial_transform(ctx.u, idx)
        det_a = np.linalg.det(init.a_init)
        det_vertices = np.linalg.det(ctx.u[idx, :])
        assert det_a != 0
        assert det_a * det_vertices == pytest.approx(1.0, rel=1e-9)

    def test_permuting_indices_permutes_memberships(self, small_dataset):
        ctx = build_context(small_dataset["m"], 4)
        idx = inner_simplex_indices(ctx.u)
        base = initial_transform(ctx.u, idx)
        swapped = initial_transform(ctx.u, [idx[1], idx[0], idx[2], idx[3]])
        h_base = (ctx.u @ base.a_init).T
        h_swapped = (ctx.u @ swapped.a_init).T
        np.testing.assert_allclose(h_swapped[[1, 0, 2, 3], :], h_base,
                                   atol=1e-10)

    def test_singular_vertices_fail(self):
        u = np.ones((5, 2))
        u[:, 1] = np.ones(5)  # rank-1 basis
        with pytest.raises((SingularVertexError, DegenerateSpanError)):
            initial_transform(u, [0, 1])

    def test_duplicate_indices_rejected(self, small_dataset):
        ctx = build_context(small_dataset["m"], 3)
        with pytest.raises(ValueError):
            initial_transform(ctx.u, [0, 0, 1])


class TestRefineTransform:
    def test_memberships_become_feasible(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        assert init.h_min < -0.1  # vertex simplex sits inside the cloud
        refined = refine_transform(init.a_init, ctx)
        h = (ctx.u @ refined).T
        assert h.min() >= -1e-9
        np.testing.assert_allclose(h.sum(axis=0), np.ones(h.shape[1]),
                                   atol=1e-9)

    def test_every_face_touches_data(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        refined = refine_transform(init.a_init, ctx)
        h = (ctx.u @ refined).T
        np.testing.assert_allclose(h.min(axis=1), np.zeros(5), atol=1e-9)

    def test_volume_grows(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        refined = refine_transform(init.a_init, ctx)
        # simplex volume is inversely proportional to |det a|
        assert abs(np.linalg.det(refined)) < abs(np.linalg.det(init.a_init))

    def test_recovers_true_vertices_on_exact_data(self, small_dataset):
        from unmixer.metrics import correlation_matrix, match_components
        from unmixer.objective import assemble
        ctx = build_context(small_dataset["m"], 5)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        refined = refine_transform(init.a_init, ctx)
        factors = assemble(refined, ctx)
        perm = match_components(factors.w, small_dataset["w"])
        corr = correlation_matrix(factors.w, small_dataset["w"])
        matched = [corr[i, perm[i]] for i in range(5)]
        assert min(matched) >= 0.95

    def test_deterministic(self, small_dataset):
        ctx = build_context(small_dataset["m"], 4)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        first = refine_transform(init.a_init, ctx)
        second = refine_transform(init.a_init, ctx)
        np.testing.assert_array_equal(first, second)
