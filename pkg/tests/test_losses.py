import numpy as np
import pytest

from sasvkit import aam_softmax_loss, finite_diff_gradient, orthogonality_penalty, weighted_bce
from sasvkit.exceptions import ZeroVectorError
from sasvkit.losses import softplus, weighted_bce_grad_logit
from sasvkit.matrix import sigmoid


class TestWeightedBce:
    def test_analytic_value(self):
        assert weighted_bce(0.5, 1, (0.1, 0.9)) == pytest.approx(0.9 * np.log(2.0), abs=1e-8)
        assert float(weighted_bce(0.5, 1, (0.1, 0.9))) == pytest.approx(0.62383246, abs=1e-7)

    def test_confident_correct(self):
        assert weighted_bce(1.0 - 1e-7, 1) == pytest.approx(0.0, abs=1e-6)

    def test_half_weights_scale_plain_bce(self, rng):
        for _ in range(50):
            p = rng.uniform(0.01, 0.99)
            y = int(rng.integers(0, 2))
            plain = -(y * np.log(p) + (1 - y) * np.log(1 - p))
            assert weighted_bce(p, y, (0.5, 0.5)) == pytest.approx(0.5 * plain, abs=1e-12)

    def test_nonnegative_after_clamp(self, rng):
        p = rng.uniform(-0.5, 1.5, size=100)  # deliberately out of range
        vals = weighted_bce(p, rng.integers(0, 2, size=100))
        assert np.all(vals >= 0.0) and np.all(np.isfinite(vals))

    def test_grad_matches_finite_difference(self, rng):
        for _ in range(100):
            z = float(rng.uniform(-6, 6))
            y = int(rng.integers(0, 2))
            w = (0.1, 0.9)
            g = float(weighted_bce_grad_logit(z, y, w))
            fd = finite_diff_gradient(lambda x: float(weighted_bce(sigmoid(x[0]), y, w)), np.array([z]))
            assert g == pytest.approx(fd[0], rel=1e-4, abs=1e-8)


class TestAamLoss:
    def test_margin_free_equals_softmax_ce(self, rng):
        for _ in range(100):
            e, w0, w1 = (rng.normal(size=5) for _ in range(3))
            y = int(rng.integers(0, 2))
            cos0 = e @ w0 / (np.linalg.norm(e) * np.linalg.norm(w0))
            cos1 = e @ w1 / (np.linalg.norm(e) * np.linalg.norm(w1))
            logits = np.array([cos0, cos1])
            ce = -logits[y] + np.log(np.exp(logits).sum())
            assert aam_softmax_loss(e, w0, w1, y, margin=0.0, scale=1.0) == pytest.approx(ce, abs=1e-10)

    def test_orthogonal_embedding_gives_ln2(self):
        e = np.array([0.0, 0.0, 1.0])
        w0 = np.array([1.0, 0.0, 0.0])
        w1 = np.array([0.0, 1.0, 0.0])
        assert aam_softmax_loss(e, w0, w1, 1, margin=0.0, scale=1.0) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            aam_softmax_loss([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], 1)

    def test_margin_penalizes_target(self, rng):
        # adding a margin never lowers the loss for the true class
        for _ in range(20):
            e, w0, w1 = (rng.normal(size=4) for _ in range(3))
            y = int(rng.integers(0, 2))
            l0 = aam_softmax_loss(e, w0, w1, y, margin=0.0, scale=10.0)
            lm = aam_softmax_loss(e, w0, w1, y, margin=0.3, scale=10.0)
            assert lm >= l0 - 1e-12


class TestOrthogonalityPenalty:
    def test_orthogonal_is_zero(self):
        assert orthogonality_penalty([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_parallel_is_one(self):
        assert orthogonality_penalty([1.0, 2.0], [3.0, 6.0]) == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self, rng):
        for _ in range(50):
            w0, w1 = rng.normal(size=6), rng.normal(size=6)
            a, b = rng.uniform(0.1, 10.0, size=2)
            assert orthogonality_penalty(a * w0, b * w1) == pytest.approx(
                orthogonality_penalty(w0, w1), abs=1e-12
            )

    def test_range(self, rng):
        for _ in range(100):
            q = orthogonality_penalty(rng.normal(size=4), rng.normal(size=4))
            assert 0.0 <= q <= 1.0


class TestFiniteDiffGradient:
    def test_quadratic(self):
        g = finite_diff_gradient(lambda x: float(x[0] ** 2), np.array([3.0]))
        assert g[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant(self):
        g = finite_diff_gradient(lambda x: 1.25, np.arange(5, dtype=float))
        np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_sum_of_squares(self, rng):
        x = rng.normal(size=7)
        g = finite_diff_gradient(lambda v: float(np.sum(v**2)), x)
        np.testing.assert_allclose(g, 2 * x, atol=1e-6)


class TestSoftplus:
    def test_no_overflow(self):
        assert np.isfinite(softplus(np.array([1000.0])))[0]
        assert softplus(np.array([1000.0]))[0] == pytest.approx(1000.0)

    def test_matches_naive_in_safe_range(self, rng):
        x = rng.uniform(-30, 30, size=100)
        np.testing.assert_allclose(softplus(x), np.log1p(np.exp(x)), atol=1e-12)
