import math

import numpy as np
import pytest

from unmixer.numerics import pinv
from unmixer.objective import (CandidateFactors, PenaltyWeights,
                               SingularTransformError, assemble, penalties,
                               psi, psi_squared_fn)
from unmixer.pcca import initial_transform, inner_simplex_indices
from unmixer.preprocess import build_context, drop_first_row, drop_last_row

RNG = np.random.default_rng(23)


def random_invertible(r, rng):
    while True:
        a = rng.standard_normal((r, r))
        if abs(np.linalg.det(a)) > 1e-3:
            return a


class TestAssemble:
    def test_identity_transform_on_pure_simplex_basis(self):
        u = np.vstack([np.eye(3), RNG.dirichlet(np.ones(3), size=10)])
        m = RNG.uniform(0.5, 2.0, size=(8, 3)) @ u.T
        from unmixer.preprocess import PccaContext
        s = pinv(drop_last_row(u)) @ drop_first_row(u)
        ctx = PccaContext(m=m, u=u, s=s, rank=3)
        factors = assemble(np.eye(3), ctx)
        np.testing.assert_allclose(factors.h, u.T, atol=1e-12)

    def test_reconstruction_invariant_under_transform(self, small_dataset):
        # on exact-rank data W~H~ projects onto the basis span, so the
        # residual does not depend on the (invertible) transformation
        ctx = build_context(small_dataset["m"], 5)
        m_norm = np.linalg.norm(small_dataset["m"])
        for _ in range(5):
            a = random_invertible(5, RNG)
            factors = assemble(a, ctx)
            residual = np.linalg.norm(small_dataset["m"] - factors.w @ factors.h)
            assert residual / m_norm <= 1e-8

    def test_transition_matrix_reproduces_markov_truth(self):
        from unmixer import compose, markov_kinetics
        p_true = np.array([[0.9, 0.1, 0.0], [0.05, 0.9, 0.05], [0.0, 0.2, 0.8]])
        h = markov_kinetics(p_true, np.array([1.0, 0.0, 0.0]), 60)
        m = compose(RNG.uniform(0.5, 2.0, size=(40, 3)), h)
        ctx = build_context(m, 3)
        # the transformation mapping the basis onto the true kinetics
        a_true = ctx.u.T @ h.T
        factors = assemble(a_true, ctx)
        np.testing.assert_allclose(factors.h, h, atol=1e-8)
        np.testing.assert_allclose(factors.p, p_true, atol=1e-8)

    def test_singular_transform_rejected(self, small_dataset):
        ctx = build_context(small_dataset["m"], 3)
        singular = np.ones((3, 3))
        with pytest.raises(SingularTransformError):
            assemble(singular, ctx)

    def test_matches_pseudoinverse_transition_form(self, small_dataset):
        # conjugated shift operator equals the one-step least-squares fit
        # computed from the kinetics directly
        ctx = build_context(small_dataset["m"], 4)
        a = random_invertible(4, RNG)
        factors = assemble(a, ctx)
        ht = factors.h.T
        expected = pinv(drop_last_row(ht)) @ drop_first_row(ht)
        np.testing.assert_allclose(factors.p, expected, atol=1e-8)


class TestPenalties:
    def test_stochastic_factors_have_zero_deviation_terms(self):
        h = RNG.dirichlet(np.ones(3), size=7).T     # column stochastic
        p = RNG.dirichlet(np.ones(3), size=3)       # row stochastic
        w = RNG.uniform(0.1, 1.0, size=(5, 3))
        factors = CandidateFactors(w=w, h=h, p=p)
        out = penalties(factors, PenaltyWeights(0.0, 0.0, 123.0, 0.0, 321.0))
        assert out.p3 == pytest.approx(0.0, abs=1e-12)
        assert out.p5 == pytest.approx(0.0, abs=1e-12)

    def test_column_sum_deviation_alone(self):
        h = np.array([[0.5, 1.25], [0.5, 0.0]])  # sums 1.0 and 1.25
        factors = CandidateFactors(w=np.ones((2, 2)), h=h, p=np.eye(2))
        out = penalties(factors, PenaltyWeights(0.0, 0.0, 1.0, 0.0, 0.0))
        assert out.psi == pytest.approx(0.25, abs=1e-15)

    def test_hand_built_weighted_sum(self):
        # minima -2 (spectra), -0.1 (kinetics), column-sum deviation 0.3
        w = np.array([[-2.0, 1.0], [1.0, 1.0]])
        h = np.array([[-0.1, 0.55], [0.8, 0.75]])
        p = np.array([[0.5, 0.5], [0.5, 0.5]])
        weights = PenaltyWeights(alpha=-0.0001, beta=-1.0, gamma=1.0,
                                 delta=0.0, mu=0.0)
        out = penalties(CandidateFactors(w=w, h=h, p=p), weights)
        assert out.psi == pytest.approx(0.4002, abs=1e-12)

    def test_sum_identity_is_exact(self, small_dataset):
        ctx = build_context(small_dataset["m"], 4)
        weights = PenaltyWeights(-0.3, 1.7, 2.5, -0.9, 0.4)
        for _ in range(10):
            out = psi(random_invertible(4, RNG), weights, ctx)
            assert out.psi == out.p1 + out.p2 + out.p3 + out.p4 + out.p5
            assert out.psi_squared == out.psi * out.psi

    def test_permutation_invariance(self, small_dataset):
        ctx = build_context(small_dataset["m"], 4)
        weights = PenaltyWeights(-0.0001, -1.0, 1.0, -0.5, 0.7)
        a = random_invertible(4, RNG)
        perm = np.eye(4)[:, [2, 0, 3, 1]]
        base = psi(a, weights, ctx)
        permuted = psi(a @ perm, weights, ctx)
        assert permuted.psi == pytest.approx(base.psi, rel=1e-12, abs=1e-12)

    def test_all_zero_weights_give_zero(self, small_dataset):
        ctx = build_context(small_dataset["m"], 3)
        weights = PenaltyWeights(0.0, 0.0, 0.0, 0.0, 0.0)
        for _ in range(5):
            assert psi(random_invertible(3, RNG), weights, ctx).psi == 0.0

    def test_deviation_terms_nonnegative_for_nonneg_weights(self, small_dataset):
        ctx = build_context(small_dataset["m"], 3)
        weights = PenaltyWeights(0.0, 0.0, 2.0, 0.0, 3.0)
        for _ in range(10):
            out = psi(random_invertible(3, RNG), weights, ctx)
            assert out.p3 >= 0.0
            assert out.p5 >= 0.0

    def test_nonfinite_weights_rejected(self):
        with pytest.raises(ValueError):
            PenaltyWeights(math.nan, 0.0, 0.0, 0.0, 0.0)


class TestPsiSquaredFn:
    def test_flatten_round_trip(self):
        a = RNG.standard_normal((4, 4))
        assert a.reshape(-1).reshape(4, 4) is not a
        np.testing.assert_array_equal(a.reshape(-1).reshape(4, 4), a)

    def test_matches_direct_evaluation(self, small_dataset):
        ctx = build_context(small_dataset["m"], 5)
        weights = PenaltyWeights(-0.0001, -1.0, 1.0, 0.0, 0.0)
        fn = psi_squared_fn(weights, ctx)
        init = initial_transform(ctx.u, inner_simplex_indices(ctx.u))
        expected = psi(init.a_init, weights, ctx).psi_squared
        assert fn(init.a_init.reshape(-1)) == expected

    def test_singular_candidate_maps_to_inf(self, small_dataset):
        ctx = build_context(small_dataset["m"], 3)
        fn = psi_squared_fn(PenaltyWeights(0, 0, 1, 0, 0), ctx)
        assert fn(np.zeros(9)) == math.inf

    def test_row_major_flattening(self, small_dataset):
        # entry (0, 1) of the transformation is the second flat coordinate
        ctx = build_context(small_dataset["m"], 2)
        weights = PenaltyWeights(0.0, 0.0, 1.0, 0.0, 0.0)
        fn = psi_squared_fn(weights, ctx)
        a = random_invertible(2, RNG)
        flat = a.reshape(-1)
        assert fn(flat) == psi(np.array([[flat[0], flat[1]],
                                         [flat[2], flat[3]]]), weights,
                               ctx).psi_squared
