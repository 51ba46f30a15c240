"""Unit and property tests for the vector arithmetic core."""

import math

import numpy as np
import pytest

from ffrank.errors import DimensionError, DomainError, EmptyInputError, ZeroVectorError
from ffrank.vectors import (
    Projection,
    contrastive_loss,
    cosine_distance,
    dot,
    l2_normalize,
    mean,
    project,
)


class TestDot:
    def test_orthogonal(self):
        assert dot([1, 0], [0, 1]) == 0.0

    def test_hand_arithmetic(self):
        # 1*4 + 2*5 + 3*6
        assert dot([1, 2, 3], [4, 5, 6]) == 32.0

    def test_unit_vector_with_itself(self):
        v = np.array([0.6, 0.8], dtype=np.float32)
        assert dot(v, v) == pytest.approx(1.0, abs=1e-7)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            dot([1, 2], [1, 2, 3])

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = rng.normal(size=16).astype(np.float32)
            b = rng.normal(size=16).astype(np.float32)
            assert dot(a, b) == pytest.approx(dot(b, a), rel=1e-12)

    def test_float64_accumulation(self):
        # catastrophic in float32 accumulation, exact in float64
        a = np.array([1e8, 1.0, -1e8], dtype=np.float64)
        b = np.ones(3)
        assert dot(a, b) == 1.0


class TestCosineDistance:
    def test_identical(self):
        v = [0.3, 0.4]
        assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine_distance([1, 0], [0, 1]) == pytest.approx(1.0)

    def test_antipodal(self):
        assert cosine_distance([1, 0], [-1, 0]) == pytest.approx(2.0)

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            cosine_distance([0, 0], [1, 0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            v = rng.normal(size=8)
            c = float(rng.uniform(0.1, 10))
            assert cosine_distance(v, c * v) == pytest.approx(0.0, abs=1e-9)

    def test_range(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            a = rng.normal(size=8)
            b = rng.normal(size=8)
            d = cosine_distance(a, b)
            assert -1e-9 <= d <= 2.0 + 1e-9


class TestMean:
    def test_singleton(self):
        v = np.array([1.5, -2.5], dtype=np.float32)
        np.testing.assert_array_equal(mean([v]), v)

    def test_two_vectors(self):
        np.testing.assert_allclose(mean([[1, 0], [0, 1]]), [0.5, 0.5])

    def test_three_vectors(self):
        np.testing.assert_allclose(mean([[2, 2], [0, 0], [1, 1]]), [1, 1])

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            mean([])

    def test_n_copies(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=6).astype(np.float32)
        for n in (1, 2, 7):
            np.testing.assert_allclose(mean([v] * n), v, atol=1e-12)


class TestL2Normalize:
    def test_hand_arithmetic(self):
        np.testing.assert_allclose(l2_normalize([3, 4]), [0.6, 0.8], rtol=1e-6)

    def test_already_unit(self):
        np.testing.assert_allclose(l2_normalize([1, 0, 0]), [1, 0, 0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            l2_normalize([0, 0])

    def test_output_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            v = rng.normal(size=12) * float(rng.uniform(0.01, 100))
            assert np.linalg.norm(l2_normalize(v)) == pytest.approx(1.0, abs=1e-6)

    def test_scale_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            v = rng.normal(size=5)
            c = float(rng.uniform(0.5, 20))
            np.testing.assert_allclose(l2_normalize(c * v), l2_normalize(v), atol=1e-9)


class TestProjection:
    def test_identity(self):
        p = Projection(weights=np.eye(3), bias=np.zeros(3))
        v = np.array([1.0, 2.0, 3.0], dtype=np.float32)
        np.testing.assert_array_equal(project(p, v), v)

    def test_hand_arithmetic(self):
        p = Projection(weights=[[1, 1]], bias=[0])
        np.testing.assert_allclose(project(p, [2, 3]), [5])

    def test_zero_weights_return_bias(self):
        p = Projection(weights=[[0, 0]], bias=[7])
        np.testing.assert_allclose(project(p, [2, 3]), [7])

    def test_dim_mismatch(self):
        p = Projection(weights=[[1, 1]], bias=[0])
        with pytest.raises(DimensionError):
            project(p, [1, 2, 3])

    def test_bias_row_mismatch(self):
        with pytest.raises(DimensionError):
            Projection(weights=[[1, 1], [2, 2]], bias=[0])


class TestContrastiveLoss:
    def test_equal_scores_give_ln2(self):
        assert contrastive_loss(1.3, [1.3], tau=1.0) == pytest.approx(math.log(2), rel=1e-12)

    def test_no_negatives(self):
        assert contrastive_loss(0.7, [], tau=1.0) == 0.0

    def test_uniform_over_four(self):
        assert contrastive_loss(0.0, [0.0, 0.0, 0.0], tau=1.0) == pytest.approx(
            math.log(4), rel=1e-12
        )

    def test_tau_validation(self):
        for tau in (0.0, -1.0):
            with pytest.raises(DomainError):
                contrastive_loss(1.0, [0.5], tau=tau)

    def test_nonnegative(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            pos = float(rng.normal())
            negs = rng.normal(size=int(rng.integers(0, 6))).tolist()
            assert contrastive_loss(pos, negs, tau=float(rng.uniform(0.1, 5))) >= 0.0

    def test_stable_for_large_scores(self):
        # would overflow exp() without log-sum-exp stabilization
        loss = contrastive_loss(1000.0, [1000.0], tau=1.0)
        assert loss == pytest.approx(math.log(2), rel=1e-12)

    def test_strictly_decreasing_in_pos_score(self):
        # finite differences at step 1e-4, checked against the analytic
        # derivative -(1 - softmax(pos)) / tau within 1e-4 relative
        h = 1e-4
        rng = np.random.default_rng(23)
        for _ in range(50):
            pos = float(rng.normal())
            negs = rng.normal(size=4).tolist()
            tau = float(rng.uniform(0.5, 2.0))
            up = contrastive_loss(pos + h, negs, tau)
            down = contrastive_loss(pos - h, negs, tau)
            central = (up - down) / (2 * h)
            assert central < 0.0
            z = [math.exp(pos / tau)] + [math.exp(n / tau) for n in negs]
            analytic = -(1.0 - z[0] / sum(z)) / tau
            assert central == pytest.approx(analytic, rel=1e-4)
