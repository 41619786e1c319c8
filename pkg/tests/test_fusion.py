import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setrep import (
    DecisionMatrix,
    DimensionMismatchError,
    PredictionTable,
    ScaleWeights,
    ValidationError,
    build_decision_matrix,
    fuse,
    learn_scale_weights,
)

from .oracles import grid_qp_oracle


def kkt_measure(D, tau, sigma, floor=0.0):
    D_hat = np.vstack([D.d, np.ones((1, D.s))])
    e_hat = np.ones(D_hat.shape[0])
    grad = 2.0 * D_hat.T @ (D_hat @ sigma - e_hat) + tau
    at_floor = sigma <= floor
    return float(np.where(at_floor, np.maximum(0.0, -grad), np.abs(grad)).max())


def fusion_objective(D, tau, sigma):
    D_hat = np.vstack([D.d, np.ones((1, D.s))])
    e_hat = np.ones(D_hat.shape[0])
    r = e_hat - D_hat @ sigma
    return float(r @ r + tau * np.sum(sigma))


class TestDecisionMatrix:
    def test_all_correct(self):
        t = PredictionTable(h=[[1, 2], [3, 4]], z=[0, 0])
        t2 = PredictionTable(h=[[5, 5], [7, 7]], z=[5, 7])
        assert np.array_equal(build_decision_matrix(t2).d, np.ones((2, 2)))
        assert np.array_equal(build_decision_matrix(t).d, -np.ones((2, 2)))

    def test_mixed(self):
        a, b, c = 1, 2, 3
        t = PredictionTable(h=[[a, b], [c, c]], z=[a, c])
        assert np.array_equal(build_decision_matrix(t).d, [[1.0, -1.0], [1.0, 1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            PredictionTable(h=[[1, 2]], z=[1, 2])

    def test_entries_must_be_pm_one(self):
        with pytest.raises(ValidationError):
            DecisionMatrix(np.array([[1.0, 0.5]]))


class TestLearnWeights:
    def test_single_always_correct_scale(self):
        D = DecisionMatrix(np.ones((3, 1)))
        w = learn_scale_weights(D, tau=0.0)
        assert w.sigma == pytest.approx([1.0], abs=1e-7)

    def test_identical_columns_get_equal_weight(self):
        D = DecisionMatrix(np.ones((5, 2)))
        w = learn_scale_weights(D, tau=0.0)
        assert abs(w.sigma[0] - w.sigma[1]) <= 1e-8

    def test_wrong_scale_gets_shut_off(self):
        D = DecisionMatrix(np.column_stack([np.ones(10), -np.ones(10)]))
        w = learn_scale_weights(D, tau=0.01)
        assert w.sigma[0] > w.sigma[1]
        assert w.sigma[1] <= 0.05
        _, ref_obj = grid_qp_oracle(D.d, 0.01)
        assert fusion_objective(D, 0.01, w.sigma) <= ref_obj + 1e-3

    def test_kkt_holds(self, rng):
        for _ in range(10):
            n, s = int(rng.integers(3, 30)), int(rng.integers(1, 6))
            D = DecisionMatrix(rng.choice([-1.0, 1.0], size=(n, s)))
            tau = float(rng.choice([0.0, 0.01, 0.5]))
            w = learn_scale_weights(D, tau)
            assert kkt_measure(D, tau, w.sigma) <= 1e-6

    def test_matches_grid_oracle_objective(self, rng):
        for _ in range(5):
            n, s = int(rng.integers(4, 20)), int(rng.integers(1, 4))
            D = DecisionMatrix(rng.choice([-1.0, 1.0], size=(n, s)))
            tau = 0.02
            w = learn_scale_weights(D, tau)
            _, ref_obj = grid_qp_oracle(D.d, tau)
            ours = fusion_objective(D, tau, w.sigma)
            assert ours <= ref_obj + 1e-3
            assert ours >= ref_obj - 1e-3  # grid oracle cannot be badly beaten

    def test_sum_window_on_realistic_tables(self, rng):
        # the [0.9, 1.1] window holds for tables shaped like real per-stage
        # runs (accuracies spread over distinct stages), not arbitrary +-1
        # matrices
        for _ in range(5):
            n = 200
            z = rng.integers(0, 10, size=n)
            h = np.zeros((n, 4), dtype=int)
            for j, acc in enumerate([0.55, 0.7, 0.85, 0.97]):
                wrong = rng.random(n) >= acc
                h[:, j] = np.where(wrong, (z + 1 + j) % 10, z)
            D = build_decision_matrix(PredictionTable(h=h, z=z))
            w = learn_scale_weights(D, tau=0.01)
            assert 0.9 <= float(np.sum(w.sigma)) <= 1.1

    def test_tau_monotonically_shrinks_total_weight(self, rng):
        D = DecisionMatrix(rng.choice([-1.0, 1.0], size=(12, 3)))
        total0 = float(np.sum(learn_scale_weights(D, 0.0).sigma))
        total10 = float(np.sum(learn_scale_weights(D, 10.0).sigma))
        assert total10 <= total0 + 1e-8

    def test_weight_floor_respected(self, rng):
        D = DecisionMatrix(rng.choice([-1.0, 1.0], size=(12, 4)))
        w = learn_scale_weights(D, tau=0.1, weight_floor=0.05)
        assert np.all(w.sigma >= 0.05)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValidationError):
            learn_scale_weights(DecisionMatrix(np.ones((2, 1))), tau=-1.0)


class TestFuse:
    def test_equal_weights_is_majority_vote(self):
        w = ScaleWeights(sigma=np.array([1.0, 1.0, 1.0]), tau=0.0)
        assert fuse([7, 7, 9], w) == 7

    def test_single_stage_wins_regardless_of_weight(self):
        assert fuse([5], ScaleWeights(sigma=np.array([1e-9]), tau=0.0)) == 5

    def test_weighted_count(self):
        w = ScaleWeights(sigma=np.array([0.7, 0.2, 0.1]), tau=0.0)
        b, a = 2, 1
        assert fuse([b, a, a], w) == b

    def test_tie_breaks_to_smallest_label(self):
        w = ScaleWeights(sigma=np.array([0.5, 0.5]), tau=0.0)
        assert fuse([9, 3], w) == 3

    def test_empty_predictions_rejected(self):
        with pytest.raises(ValidationError):
            fuse([], ScaleWeights(sigma=np.array([1.0]), tau=0.0))

    @given(
        seed=st.integers(0, 2**32 - 1),
        scale=st.floats(0.1, 50.0),
        s=st.integers(1, 6),
    )
    @settings(max_examples=60, deadline=None)
    def test_positive_rescaling_never_changes_decisions(self, seed, scale, s):
        rng = np.random.default_rng(seed)
        sigma = rng.uniform(0.01, 1.0, size=s)
        preds = rng.integers(0, 4, size=s)
        w1 = ScaleWeights(sigma=sigma, tau=0.0)
        w2 = ScaleWeights(sigma=scale * sigma, tau=0.0)
        assert fuse(preds, w1) == fuse(preds, w2)


class TestDominantScale:
    def test_dominant_scale_gets_largest_weight_and_perfect_fusion(self, rng):
        # scale 2 is the unique all-correct column; others are noisy
        n, s = 40, 3
        z = rng.integers(0, 5, size=n)
        h = np.zeros((n, s), dtype=int)
        for j in range(s):
            if j == 2:
                h[:, j] = z
            else:
                flip = rng.random(n) < 0.45
                h[:, j] = np.where(flip, (z + 1 + j) % 5, z)
        table = PredictionTable(h=h, z=z)
        D = build_decision_matrix(table)
        w = learn_scale_weights(D, tau=0.01)
        assert np.argmax(w.sigma) == 2
        fused = np.array([fuse(row, w) for row in h])
        accs = [(h[:, j] == z).mean() for j in range(s)]
        assert (fused == z).mean() >= max(accs)
        _, ref_obj = grid_qp_oracle(D.d, 0.01)
        assert fusion_objective(D, 0.01, w.sigma) == pytest.approx(ref_obj, abs=1e-3)
