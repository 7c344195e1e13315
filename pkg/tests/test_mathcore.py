import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedph.mathcore import (
    DimensionMismatchError,
    RngStream,
    ZeroVectorError,
    cosine_similarity,
    l1_distance,
    l2_distance,
    sample_dirichlet,
    sample_gaussian,
)


class TestCosineSimilarity:
    def test_identical_vectors(self):
        assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)

    def test_collinear(self):
        assert cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVectorError):
            cosine_similarity([0, 0], [1, 1])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine_similarity([1, 2], [1, 2, 3])

    @given(st.floats(0.01, 100), st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_positive_scaling_gives_one(self, c, seed):
        rng = RngStream(seed)
        a = rng.normal(0, 1, 5)
        if np.linalg.norm(a) == 0:
            return
        assert cosine_similarity(a, c * a) == pytest.approx(1.0)
        assert cosine_similarity(a, -c * a) == pytest.approx(-1.0)


class TestDistances:
    def test_l1_345(self):
        assert l1_distance([0, 0], [3, 4]) == pytest.approx(7.0)

    def test_l2_345(self):
        assert l2_distance([0, 0], [3, 4]) == pytest.approx(5.0)

    def test_l2_identity(self):
        a = np.array([1.5, -2.5, 3.0])
        assert l2_distance(a, a) == 0.0

    def test_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            l1_distance([1], [1, 2])

    @given(st.integers(0, 500))
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, seed):
        rng = RngStream(seed, 7)
        a, b, c = (rng.normal(0, 3, 6) for _ in range(3))
        assert l2_distance(a, c) <= l2_distance(a, b) + l2_distance(b, c) + 1e-12


class TestSampleGaussian:
    def test_zero_std_constant(self):
        out = sample_gaussian(RngStream(0), 0.0, 0.0, 4)
        assert np.array_equal(out, np.zeros(4))

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError):
            sample_gaussian(RngStream(0), 0.0, -1.0, 4)

    def test_monte_carlo_mean(self):
        # mean of 1e6 draws of N(2,1): standard error 1e-3, gate at 2e-3
        draws = sample_gaussian(RngStream(1234, 1), 2.0, 1.0, 10**6)
        assert abs(draws.mean() - 2.0) < 2e-3

    def test_monte_carlo_variance(self):
        draws = sample_gaussian(RngStream(99, 2), 0.0, 3.0, 10**6)
        assert abs(draws.var() - 9.0) / 9.0 < 0.01


class TestSampleDirichlet:
    def test_simplex(self):
        draw = sample_dirichlet(RngStream(5), [0.5, 1.5, 2.0])
        assert np.all(draw >= 0)
        assert abs(draw.sum() - 1.0) < 1e-12

    def test_concentration(self):
        draw = sample_dirichlet(RngStream(6), [1e6, 1e6, 1e6])
        assert np.all(np.abs(draw - 1 / 3) < 0.01)

    def test_monte_carlo_mean(self):
        rng = RngStream(7)
        draws = np.array([sample_dirichlet(rng, [1.0, 3.0]) for _ in range(10**5)])
        mean = draws.mean(axis=0)
        assert abs(mean[0] - 0.25) < 0.01
        assert abs(mean[1] - 0.75) < 0.01

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError):
            sample_dirichlet(RngStream(0), [1.0, 0.0])


class TestRngStream:
    def test_bitwise_reproducible(self):
        a = RngStream(42, 3).normal(0, 1, 100)
        b = RngStream(42, 3).normal(0, 1, 100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 3).normal(0, 1, 100)
        b = RngStream(42, 4).normal(0, 1, 100)
        assert not np.array_equal(a, b)

    def test_mixed_draw_sequence_reproducible(self):
        def draw(stream):
            return (
                stream.normal(0, 1, 5).tolist(),
                stream.bytes(16),
                stream.permutation(10).tolist(),
            )

        assert draw(RngStream(7, 1)) == draw(RngStream(7, 1))
