"""Kernel ridge, kernel logistic, and linear softmax solvers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.special import softmax

from adaptive_ope.regression import (
    gaussian_kernel,
    kernel_logistic_fit,
    kernel_ridge_fit,
    multinomial_logistic_fit,
    pairwise_sq_dists,
)


class TestGaussianKernel:
    def test_pairwise_distances_by_hand(self):
        a = np.array([[0.0, 0.0], [1.0, 1.0]])
        b = np.array([[1.0, 0.0]])
        np.testing.assert_allclose(pairwise_sq_dists(a, b), [[1.0], [1.0]])

    def test_kernel_value_by_hand(self):
        a = np.array([[0.0]])
        b = np.array([[2.0]])
        np.testing.assert_allclose(gaussian_kernel(a, b, 0.5), [[np.exp(-2.0)]])

    def test_diagonal_is_one(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 3))
        np.testing.assert_allclose(np.diag(gaussian_kernel(x, x, 0.7)), 1.0)

    def test_covariate_free_kernel_is_all_ones(self):
        k = gaussian_kernel(np.zeros((3, 0)), np.zeros((2, 0)), 1.0)
        np.testing.assert_array_equal(k, np.ones((3, 2)))

    def test_nonpositive_gamma_rejected(self):
        with pytest.raises(ValueError):
            gaussian_kernel(np.zeros((1, 1)), np.zeros((1, 1)), 0.0)


class TestKernelRidge:
    def test_single_point_any_penalty_returns_target(self):
        # the training mean is unpenalized, and a single point IS its mean,
        # so the centered residual vanishes and the penalty is irrelevant
        for lam in (1.0, 1e-8, 50.0):
            fit = kernel_ridge_fit(np.array([[0.0]]), np.array([1.0]), lam=lam, gamma=1.0)
            np.testing.assert_allclose(fit.predict(np.array([[0.0]])), [1.0])

    def test_two_identical_points(self):
        x = np.array([[3.0], [3.0]])
        y = np.array([2.0, 2.0])
        fit = kernel_ridge_fit(x, y, lam=0.01, gamma=1.0)
        pred = fit.predict(np.array([[3.0]]))[0]
        assert 1.9 <= pred <= 2.0
        np.testing.assert_allclose(pred, 2.0, rtol=1e-12)

    def test_two_distinct_points_hand_system(self):
        # x = 0, 1 with y = 0, 1 at gamma = 1, lam = 0.5: centered targets
        # are (-1/2, 1/2), and symmetry gives dual = (-a, a) with
        # (1 + lam - e^-1) a = 1/2, so prediction at x=0 is
        # 1/2 - a (1 - e^-1).
        fit = kernel_ridge_fit(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), lam=0.5, gamma=1.0)
        a = 0.5 / (1.5 - np.exp(-1.0))
        np.testing.assert_allclose(
            fit.predict(np.array([[0.0]]))[0], 0.5 - a * (1.0 - np.exp(-1.0)), rtol=1e-12
        )

    def test_covariate_free_constant_is_mean(self):
        fit = kernel_ridge_fit(np.zeros((4, 0)), np.array([1.0, 2.0, 3.0, 4.0]), lam=1.0, gamma=1.0)
        np.testing.assert_allclose(fit.predict(np.zeros((2, 0))), [2.5, 2.5])

    def test_covariate_free_matches_dense_solve(self):
        # the all-ones system on centered targets must contribute nothing,
        # leaving exactly the mean
        y = np.array([0.5, -1.0, 2.5])
        fit = kernel_ridge_fit(np.zeros((3, 0)), y, lam=0.3, gamma=1.0)
        kmat = np.ones((3, 3)) + 0.3 * np.eye(3)
        expected = y.mean() + float(np.ones(3) @ np.linalg.solve(kmat, y - y.mean()))
        np.testing.assert_allclose(expected, y.mean(), rtol=1e-12)
        np.testing.assert_allclose(fit.predict(np.zeros((1, 0)))[0], expected, rtol=1e-12)

    def test_rejects_empty_training_set(self):
        with pytest.raises(ValueError):
            kernel_ridge_fit(np.zeros((0, 1)), np.zeros(0), lam=1.0, gamma=1.0)

    def test_rejects_nonpositive_penalty(self):
        with pytest.raises(ValueError):
            kernel_ridge_fit(np.zeros((1, 1)), np.ones(1), lam=0.0, gamma=1.0)

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2**32 - 1))
    def test_linear_in_targets(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((8, 2))
        y1 = rng.standard_normal(8)
        y2 = rng.standard_normal(8)
        q = rng.standard_normal((3, 2))
        f1 = kernel_ridge_fit(x, y1, 0.1, 0.5).predict(q)
        f2 = kernel_ridge_fit(x, y2, 0.1, 0.5).predict(q)
        f12 = kernel_ridge_fit(x, y1 + y2, 0.1, 0.5).predict(q)
        np.testing.assert_allclose(f12, f1 + f2, atol=1e-9)


def _two_class_penalized_loss_1d(b, counts, lam):
    # symmetric parametrization beta = (b, -b); the optimum of the full
    # problem has this form because the penalty pins the overall shift
    beta = np.array([b, -b])
    ce = counts.sum() * np.logaddexp(b, -b) - counts @ beta
    return ce + 0.5 * lam * float(beta @ beta)


class TestKernelLogistic:
    def test_balanced_actions_give_half(self):
        labels = np.array([0, 1, 0, 1])
        fit = kernel_logistic_fit(np.zeros((4, 0)), labels, 2, lam=0.1, gamma=1.0)
        probs = fit.predict_proba(np.zeros((1, 0)))[0]
        np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-6)

    def test_shrinks_toward_uniform_under_heavy_penalty(self):
        labels = np.array([0, 0, 0, 1])
        fit = kernel_logistic_fit(np.zeros((4, 0)), labels, 2, lam=1.0, gamma=1.0)
        p1 = fit.predict_proba(np.zeros((1, 0)))[0, 0]
        assert 0.5 < p1 < 0.75

    def test_matches_direct_one_dimensional_optimization(self):
        labels = np.array([0, 0, 0, 1])
        counts = np.array([3.0, 1.0])
        fit = kernel_logistic_fit(np.zeros((4, 0)), labels, 2, lam=1.0, gamma=1.0)
        p1 = fit.predict_proba(np.zeros((1, 0)))[0, 0]
        res = minimize_scalar(
            _two_class_penalized_loss_1d, bounds=(-5.0, 5.0), args=(counts, 1.0), method="bounded"
        )
        expected = softmax([res.x, -res.x])[0]
        np.testing.assert_allclose(p1, expected, atol=1e-6)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((20, 3))
        labels = rng.integers(0, 3, size=20)
        fit = kernel_logistic_fit(x, labels, 3, lam=0.1, gamma=0.1)
        probs = fit.predict_proba(rng.standard_normal((7, 3)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(probs > 0.0)

    def test_separable_data_learns_the_split(self):
        x = np.vstack([np.full((10, 1), -2.0), np.full((10, 1), 2.0)])
        labels = np.array([0] * 10 + [1] * 10)
        fit = kernel_logistic_fit(x, labels, 2, lam=0.01, gamma=1.0)
        left = fit.predict_proba(np.array([[-2.0]]))[0]
        right = fit.predict_proba(np.array([[2.0]]))[0]
        assert left[0] > 0.9
        assert right[1] > 0.9

    def test_warm_start_agrees_with_cold_start(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((15, 2))
        labels = rng.integers(0, 2, size=15)
        cold = kernel_logistic_fit(x, labels, 2, lam=0.1, gamma=0.5)
        other = kernel_logistic_fit(x, labels, 2, lam=1.0, gamma=0.5)
        warm = kernel_logistic_fit(x, labels, 2, lam=0.1, gamma=0.5, coef0=other.coef)
        q = rng.standard_normal((5, 2))
        # The solver stops on relative objective decrease, so two starting
        # points land on nearby (not identical) near-optima; 5e-4 is the
        # resolution that stopping rule guarantees for the probabilities.
        np.testing.assert_allclose(
            warm.predict_proba(q), cold.predict_proba(q), atol=5e-4
        )

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            kernel_logistic_fit(np.zeros((2, 1)), np.array([0, 2]), 2, lam=0.1, gamma=1.0)

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            kernel_logistic_fit(np.zeros((0, 1)), np.zeros(0, dtype=int), 2, lam=0.1, gamma=1.0)


class TestMultinomialLogistic:
    def test_constant_features_recover_class_frequencies(self):
        # with identical covariates the unpenalized intercept carries the
        # fit, whose MLE is the empirical distribution
        x = np.ones((8, 2))
        labels = np.array([0, 0, 0, 0, 1, 1, 2, 2])
        fit = multinomial_logistic_fit(x, labels, 3, penalty=1.0)
        probs = fit.predict_proba(np.ones((1, 2)))[0]
        np.testing.assert_allclose(probs, [0.5, 0.25, 0.25], atol=1e-4)

    def test_separable_direction_is_learned(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((60, 2))
        labels = (x[:, 0] > 0).astype(int)
        fit = multinomial_logistic_fit(x, labels, 2, penalty=0.1)
        probs = fit.predict_proba(np.array([[3.0, 0.0], [-3.0, 0.0]]))
        assert probs[0, 1] > 0.9
        assert probs[1, 0] > 0.9

    def test_probabilities_normalized(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((30, 4))
        labels = rng.integers(0, 3, size=30)
        fit = multinomial_logistic_fit(x, labels, 3)
        probs = fit.predict_proba(rng.standard_normal((9, 4)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
