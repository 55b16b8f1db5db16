import math

import numpy as np
import pytest

from wavefuse.data import BlobSpec, generate_blobs
from wavefuse.errors import ConfigError, DivergenceError, ShapeError
from wavefuse.learner import (
    MlpParams,
    TrainConfig,
    fit,
    global_average_pool,
    gradient_embeddings,
    init_params,
    mc_dropout_predict,
    penultimate_embeddings,
    predict_proba,
    train,
)

from oracles import gradient_rel_error


def hand_params(dropout_p=0.0):
    W1 = np.array([[1.0, -1.0], [2.0, 0.5]])
    b1 = np.array([0.0, -1.0])
    W2 = np.array([[0.1, -0.1], [0.3, 0.2]])
    b2 = np.array([0.0, 0.5])
    return MlpParams(W1, b1, W2, b2, dropout_p)


class TestForward:
    def test_hand_computed_probabilities(self):
        # pre = [1*1 + 2*2, -1 + 2*0.5] + [0, -1] = [5, -1] -> h = [5, 0]
        # logits = [0.5, -0.5] + [0, 0.5] = [0.5, 0.0]
        p = predict_proba(hand_params(), [[1.0, 2.0]])
        e = math.exp(0.5)
        np.testing.assert_allclose(p, [[e / (e + 1), 1 / (e + 1)]], rtol=1e-12)

    def test_hand_computed_embedding(self):
        h = penultimate_embeddings(hand_params(), [[1.0, 2.0]])
        np.testing.assert_array_equal(h, [[5.0, 0.0]])

    def test_zero_weights_uniform(self):
        p = MlpParams(np.zeros((3, 4)), np.zeros(4), np.zeros((4, 5)), np.zeros(5))
        np.testing.assert_allclose(predict_proba(p, np.ones((2, 3))), 0.2, rtol=1e-15)

    def test_rows_are_distributions(self, rng):
        p = init_params(6, 4, 8, seed=1)
        probs = predict_proba(p, rng.normal(size=(50, 6)) * 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all((probs > 0) & (probs < 1))

    def test_identity_embedding(self):
        p = MlpParams(np.eye(3), np.zeros(3), np.zeros((3, 2)), np.zeros(2))
        x = np.array([[0.5, 1.0, 2.0], [0.0, 3.0, 0.1]])
        np.testing.assert_array_equal(penultimate_embeddings(p, x), x)

    def test_negative_preactivation_zero_embedding(self):
        p = MlpParams(np.eye(2), np.array([-10.0, -10.0]), np.zeros((2, 2)), np.zeros(2))
        np.testing.assert_array_equal(penultimate_embeddings(p, [[1.0, 2.0]]), [[0.0, 0.0]])

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            predict_proba(hand_params(), np.ones((1, 3)))

    def test_logit_shift_keeps_argmax(self, rng):
        p = init_params(4, 3, 6, seed=2)
        shifted = MlpParams(p.W1, p.b1, p.W2, p.b2 + 7.5)
        x = rng.normal(size=(30, 4))
        a, b = predict_proba(p, x), predict_proba(shifted, x)
        np.testing.assert_array_equal(a.argmax(1), b.argmax(1))
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestMcDropout:
    def test_p_zero_matches_deterministic(self, rng):
        p = init_params(3, 4, 5, dropout_p=0.0, seed=0)
        x = rng.normal(size=(8, 3))
        stack = mc_dropout_predict(p, x, 6, seed=1)
        for m in range(6):
            np.testing.assert_array_equal(stack[m], predict_proba(p, x))

    def test_keep_rate(self):
        # h = (1, 1); with keep prob 0.5 each unit becomes 0 or 2, so
        # logits = (m1, 2 * m2, 0) with m in {0, 2}
        p = MlpParams(np.zeros((1, 2)), np.ones(2), np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]),
                      np.zeros(3), dropout_p=0.5)
        stack = mc_dropout_predict(p, [[0.0]], 10_000, seed=3)[:, 0, :]
        m1 = np.log(stack[:, 0] / stack[:, 2])
        m2 = np.log(stack[:, 1] / stack[:, 2]) / 2.0
        for m in (m1, m2):
            assert set(np.round(m, 9).tolist()) <= {0.0, 2.0}
            assert abs(np.mean(m > 0) - 0.5) <= 0.02

    def test_deterministic(self, rng):
        p = init_params(3, 2, 5, dropout_p=0.3, seed=0)
        x = rng.normal(size=(4, 3))
        np.testing.assert_array_equal(mc_dropout_predict(p, x, 5, 9), mc_dropout_predict(p, x, 5, 9))

    def test_rows_sum_to_one(self, rng):
        p = init_params(3, 4, 5, dropout_p=0.5, seed=0)
        stack = mc_dropout_predict(p, rng.normal(size=(10, 3)), 4, 0)
        np.testing.assert_allclose(stack.sum(-1), 1.0, atol=1e-9)

    def test_needs_two_passes(self):
        with pytest.raises(ConfigError):
            mc_dropout_predict(hand_params(0.5), [[1.0, 2.0]], 1, 0)


class TestGradientEmbeddings:
    def test_direct_substitution(self):
        # f = (0.8, 0.2), h = (1, 2): logits ln 4 apart with identity hidden layer
        p = MlpParams(np.eye(2), np.zeros(2), np.zeros((2, 2)), np.array([math.log(4.0), 0.0]))
        g = gradient_embeddings(p, [[1.0, 2.0]])
        np.testing.assert_allclose(g, [[0.2, 0.4, -0.2, -0.4]], atol=1e-12)

    def test_one_hot_prediction_gives_zero(self):
        p = MlpParams(np.eye(2), np.zeros(2), np.zeros((2, 2)), np.array([800.0, 0.0]))
        np.testing.assert_array_equal(gradient_embeddings(p, [[1.0, 2.0]]), [[0.0] * 4])

    def test_norm_identity(self, rng):
        p = init_params(5, 4, 7, seed=3)
        x = rng.normal(size=(20, 5))
        g = gradient_embeddings(p, x)
        probs = predict_proba(p, x)
        resid = np.eye(4)[probs.argmax(1)] - probs
        h = penultimate_embeddings(p, x)
        np.testing.assert_allclose(
            np.linalg.norm(g, axis=1),
            np.linalg.norm(resid, axis=1) * np.linalg.norm(h, axis=1),
            rtol=1e-12,
        )


class TestPooling:
    def test_constant(self):
        np.testing.assert_array_equal(global_average_pool(np.full((3, 4, 5), 2.5)), [2.5] * 3)

    def test_one_by_one(self):
        fm = np.array([[[1.0]], [[-2.0]]])
        np.testing.assert_array_equal(global_average_pool(fm), [1.0, -2.0])

    def test_two_by_two(self):
        fm = np.array([[[1.0, 2.0], [3.0, 4.0]]] * 2)
        np.testing.assert_array_equal(global_average_pool(fm), [2.5, 2.5])


class TestTraining:
    @pytest.mark.parametrize("instance", range(20))
    def test_gradient_matches_central_differences(self, instance):
        assert gradient_rel_error(instance) < 1e-3

    def test_separable_blobs_reach_full_accuracy(self, two_blobs):
        from sklearn.linear_model import LogisticRegression

        oracle = LogisticRegression(C=1e4, max_iter=2000).fit(two_blobs.features, two_blobs.labels)
        assert oracle.score(two_blobs.features, two_blobs.labels) == 1.0
        params = train(two_blobs, np.arange(60), TrainConfig(epochs=50, seed=4))
        preds = predict_proba(params, two_blobs.features).argmax(1)
        assert np.all(preds == two_blobs.labels)

    def test_full_batch_loss_non_increasing(self, five_class):
        cfg = TrainConfig(learning_rate=0.05, epochs=200, minibatch=10_000, dropout_p=0.0, l2=1e-3)
        _, history = fit(five_class, np.arange(0, 400, 3), cfg)
        assert np.all(np.diff(history) <= 1e-6)
        assert history[-1] < history[0]

    def test_deterministic(self, five_class):
        cfg = TrainConfig(epochs=5, seed=11)
        a = train(five_class, np.arange(50), cfg)
        b = train(five_class, np.arange(50), cfg)
        for name in ("W1", "b1", "W2", "b2"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_missing_classes_allowed(self, five_class):
        idx = np.flatnonzero(five_class.labels < 2)[:20]
        params = train(five_class, idx, TrainConfig(epochs=3))
        assert params.n_classes == 5

    def test_epochs_zero_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)

    def test_divergence_names_epoch(self):
        ds = generate_blobs(BlobSpec([[0.0, 0.0], [3.0, 3.0]], [1.0, 1.0], [5, 5]), 0)
        with pytest.raises(DivergenceError, match="epoch 1"):
            with np.errstate(all="ignore"):
                train(ds, np.arange(10), TrainConfig(learning_rate=1e308, epochs=3, dropout_p=0.0))
