"""Tests for normalization, similarity, log-softmax and PCA kernels."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hiercl.exceptions import (
    DegenerateInputError,
    DimensionMismatchError,
    NonFiniteError,
    ValidationError,
)
from hiercl.numerics import (
    cosine_sim,
    l2_normalize,
    l2_normalize_rows,
    log_softmax_row,
    log_softmax_rows,
    normalize_rows_backward,
    pca2,
    sim_matrix,
)
from tests.conftest import numerical_grad, rel_error


class TestNormalize:
    def test_unit_length(self):
        v = l2_normalize([3.0, 4.0])
        assert v.tolist() == [0.6, 0.8]

    def test_zero_vector(self):
        with pytest.raises(DegenerateInputError):
            l2_normalize([0.0, 0.0, 0.0])

    def test_rows(self, rng):
        M = l2_normalize_rows(rng.normal(size=(5, 3)))
        assert np.allclose(np.linalg.norm(M, axis=1), 1.0)

    def test_zero_row_named(self):
        with pytest.raises(DegenerateInputError, match="Row 1"):
            l2_normalize_rows([[1.0, 0.0], [0.0, 0.0]])

    def test_non_finite_input(self):
        with pytest.raises(NonFiniteError):
            l2_normalize([1.0, float("nan")])

    def test_wrong_rank(self):
        with pytest.raises(DimensionMismatchError):
            l2_normalize_rows([1.0, 2.0])


class TestCosine:
    def test_parallel_and_opposite(self):
        assert cosine_sim([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0)
        assert cosine_sim([1.0, 2.0], [-1.0, -2.0]) == pytest.approx(-1.0)

    def test_clamped(self, rng):
        v = rng.normal(size=7)
        value = cosine_sim(v, 3.0 * v)
        assert -1.0 <= value <= 1.0

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 5.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine_sim([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_zero_vector(self):
        with pytest.raises(DegenerateInputError):
            cosine_sim([0.0, 0.0], [1.0, 0.0])

    def test_sim_matrix_matches_pairwise(self, rng):
        A = rng.normal(size=(4, 6))
        B = rng.normal(size=(3, 6))
        S = sim_matrix(A, B)
        assert S.shape == (4, 3)
        for i in range(4):
            for j in range(3):
                assert S[i, j] == pytest.approx(cosine_sim(A[i], B[j]), abs=1e-12)

    def test_sim_matrix_inner_dim_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            sim_matrix(rng.normal(size=(2, 3)), rng.normal(size=(2, 4)))


class TestLogSoftmax:
    def test_huge_logits_are_stable(self):
        out = log_softmax_row([1000.0, 1000.0])
        assert out.tolist() == pytest.approx([-math.log(2.0)] * 2)

    def test_exponentiates_to_distribution(self, rng):
        out = log_softmax_row(rng.normal(size=9) * 30.0)
        assert float(np.exp(out).sum()) == pytest.approx(1.0)

    def test_single_logit(self):
        assert log_softmax_row([7.5]).tolist() == [0.0]

    def test_empty(self):
        with pytest.raises(ValidationError):
            log_softmax_row([])

    def test_rows_agree_with_single_row(self, rng):
        L = rng.normal(size=(3, 5)) * 10.0
        rows = log_softmax_rows(L)
        for i in range(3):
            assert np.allclose(rows[i], log_softmax_row(L[i]), atol=1e-14)


class TestNormalizeBackward:
    def test_matches_finite_differences(self, rng):
        X = rng.normal(size=(3, 4))
        G = rng.normal(size=(3, 4))

        def f(Y):
            return float(np.sum(G * (Y / np.linalg.norm(Y, axis=1, keepdims=True))))

        analytic = normalize_rows_backward(X, G)
        assert rel_error(analytic, numerical_grad(f, X)) < 1e-7

    def test_radial_gradient_vanishes(self, rng):
        X = rng.normal(size=(2, 5))
        G = X / np.linalg.norm(X, axis=1, keepdims=True)
        assert np.allclose(normalize_rows_backward(X, G), 0.0, atol=1e-14)


class TestPCA:
    def test_axis_aligned_data(self):
        X = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 0.5], [0.0, -0.5]])
        result = pca2(X)
        assert np.allclose(result.components[0], [1.0, 0.0])
        assert np.allclose(np.abs(result.components[1]), [0.0, 1.0])
        assert result.explained_variance[0] == pytest.approx(8.0 / 3.0)
        assert result.explained_variance[1] == pytest.approx(0.5 / 3.0)
        assert np.allclose(result.projection[:, 0], [2.0, -2.0, 0.0, 0.0])

    def test_points_on_a_line(self):
        t = np.linspace(-3.0, 3.0, 11)
        result = pca2(np.column_stack([t, 2.0 * t]))
        assert result.explained_variance[1] == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(result.components[0], np.array([1.0, 2.0]) / np.sqrt(5.0))

    def test_isotropic_cloud_has_equal_variances(self, rng):
        first, second = pca2(rng.normal(size=(10_000, 2))).explained_variance
        assert second == pytest.approx(first, rel=0.2)

    def test_anisotropic_cloud_follows_long_axis(self, rng):
        X = rng.normal(size=(5_000, 2)) * np.array([3.0, 1.0])
        assert abs(pca2(X).components[0] @ np.array([1.0, 0.0])) > 0.99

    def test_variances_ordered_and_non_negative(self, rng):
        result = pca2(rng.normal(size=(20, 6)) * np.arange(1, 7))
        first, second = result.explained_variance
        assert first >= second >= 0.0

    def test_components_are_orthonormal(self, rng):
        C = pca2(rng.normal(size=(15, 5))).components
        assert np.allclose(C @ C.T, np.eye(2), atol=1e-10)

    def test_sign_convention(self, rng):
        C = pca2(rng.normal(size=(12, 4))).components
        for c in C:
            assert c[np.argmax(np.abs(c))] > 0

    def test_negated_data_gives_same_components(self, rng):
        X = rng.normal(size=(10, 3))
        assert np.allclose(pca2(X).components, pca2(-X).components)

    def test_identical_rows(self):
        with pytest.raises(DegenerateInputError):
            pca2(np.ones((5, 3)))

    def test_too_few_rows(self):
        with pytest.raises(ValidationError):
            pca2(np.eye(2))

    def test_single_column(self):
        with pytest.raises(ValidationError):
            pca2(np.arange(5.0).reshape(5, 1))

    def test_projection_shape(self, rng):
        assert pca2(rng.normal(size=(7, 9))).projection.shape == (7, 2)
