import hashlib

import numpy as np
import pytest

from sasvkit import CountermeasureClassifier, assist_transform
from sasvkit.exceptions import EmptyClassError, ShapeMismatchError


def _separable_set(rng, n=60, dim=4, gap=4.0):
    X0 = rng.normal(size=(n, dim)) + gap * np.eye(dim)[0]
    X1 = rng.normal(size=(n, dim)) - gap * np.eye(dim)[0]
    X = np.vstack([X0, X1])
    y = np.array([0] * n + [1] * n)  # class 1 bona fide on the negative side
    return X, y


class TestFitBasics:
    def test_zero_epochs_returns_initialization(self, rng):
        X, y = _separable_set(rng)
        a = CountermeasureClassifier(epochs=0, seed=5).fit(X, y)
        b = CountermeasureClassifier(epochs=0, seed=5).fit(X, y)
        np.testing.assert_array_equal(a.w0_, b.w0_)
        np.testing.assert_array_equal(a.w1_, b.w1_)
        assert a.report_.epoch_losses == []

    def test_same_seed_bit_identical(self, rng):
        X, y = _separable_set(rng)
        a = CountermeasureClassifier(epochs=20, lr=0.05, batch_size=16, seed=42).fit(X, y)
        b = CountermeasureClassifier(epochs=20, lr=0.05, batch_size=16, seed=42).fit(X, y)
        np.testing.assert_array_equal(a.w0_, b.w0_)
        np.testing.assert_array_equal(a.w1_, b.w1_)
        assert a.report_.epoch_losses == b.report_.epoch_losses

    def test_empty_class_rejected(self, rng):
        X = rng.normal(size=(10, 3))
        with pytest.raises(EmptyClassError):
            CountermeasureClassifier().fit(X, np.ones(10))

    def test_separable_toy_set_trains_to_accuracy_one(self, rng):
        X, y = _separable_set(rng, n=40, dim=2, gap=5.0)
        clf = CountermeasureClassifier(margin=0.0, epochs=200, lr=0.1, batch_size=16, seed=7).fit(X, y)
        scores = clf.decision_function(X)
        # exhaustive check of the trained scorer on the training set
        assert np.all((scores >= 0).astype(int) == y)
        assert np.all(np.sign(scores[y == 1]) > 0)
        assert np.all(np.sign(scores[y == 0]) < 0)

    def test_losses_decrease_on_average(self, rng):
        X, y = _separable_set(rng)
        clf = CountermeasureClassifier(epochs=50, lr=0.05, batch_size=0x7FFFFFFF, seed=3).fit(X, y)
        losses = clf.report_.epoch_losses
        assert losses[-1] < losses[0]


class TestOrthPenaltyIntegration:
    def test_penalty_drives_weights_orthogonal(self, rng):
        X, y = _separable_set(rng, n=80, dim=6)
        free = CountermeasureClassifier(epochs=100, lr=0.1, seed=11, orth_lambda=0.0).fit(X, y)
        reg = CountermeasureClassifier(epochs=100, lr=0.1, seed=11, orth_lambda=5.0).fit(X, y)

        def abs_cos(a, b):
            return abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))

        assert abs_cos(reg.w0_, reg.w1_) < abs_cos(free.w0_, free.w1_) + 1e-9


class TestAssist:
    def test_block_identity_passthrough(self, rng):
        dim = 3
        e_cm = rng.normal(size=dim)
        e_spk = rng.normal(size=dim)
        M = np.hstack([np.eye(dim), np.zeros((dim, dim))])
        out = assist_transform(e_cm, e_spk, M, np.zeros(dim))
        np.testing.assert_allclose(out, e_cm, atol=1e-15)

    def test_constant_map(self, rng):
        dim = 3
        out = assist_transform(rng.normal(size=dim), rng.normal(size=dim),
                               np.zeros((dim, 2 * dim)), np.full(dim, 2.5))
        np.testing.assert_allclose(out, 2.5, atol=1e-15)

    def test_matrix_vector_oracle(self, rng):
        dim = 4
        for _ in range(50):
            e_cm, e_spk = rng.normal(size=dim), rng.normal(size=dim)
            M, b = rng.normal(size=(dim, 2 * dim)), rng.normal(size=dim)
            expected = M @ np.concatenate([e_cm, e_spk]) + b
            np.testing.assert_allclose(assist_transform(e_cm, e_spk, M, b), expected, atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            assist_transform(rng.normal(size=3), rng.normal(size=3), rng.normal(size=(3, 5)), np.zeros(3))

    def test_fit_with_assist_requires_speaker(self, rng):
        X, y = _separable_set(rng, n=20, dim=3)
        with pytest.raises(ShapeMismatchError):
            CountermeasureClassifier(assist=True).fit(X, y)

    def test_assist_training_deterministic(self, rng):
        X, y = _separable_set(rng, n=30, dim=3)
        spk = rng.normal(size=X.shape)
        a = CountermeasureClassifier(assist=True, epochs=15, seed=2).fit(X, y, speaker=spk)
        b = CountermeasureClassifier(assist=True, epochs=15, seed=2).fit(X, y, speaker=spk)
        np.testing.assert_array_equal(a.assist_weight_, b.assist_weight_)
        np.testing.assert_array_equal(a.w1_, b.w1_)


class TestCopyFitted:
    def test_copy_is_deep(self, rng):
        X, y = _separable_set(rng, n=20, dim=3)
        clf = CountermeasureClassifier(epochs=5, seed=1).fit(X, y)
        dup = clf.copy_fitted()
        before = hashlib.sha256(clf.w0_.tobytes() + clf.w1_.tobytes()).hexdigest()
        dup.w0_ += 100.0
        after = hashlib.sha256(clf.w0_.tobytes() + clf.w1_.tobytes()).hexdigest()
        assert before == after
        np.testing.assert_array_equal(dup.w1_, clf.w1_)

    def test_sklearn_params_round_trip(self):
        clf = CountermeasureClassifier(margin=0.3, scale=10.0, orth_lambda=0.5)
        params = clf.get_params()
        clone = CountermeasureClassifier(**params)
        assert clone.get_params() == params
