#!/usr/bin/env python3
"""
Tests for weighted EM and mixture conditional means
"""

import numpy as np
import pytest
from scipy.integrate import quad_vec, trapezoid
from scipy.stats import multivariate_normal, norm

from selate.errors import EstimationError
from selate.gmm import (
    MONOTONE_SLACK, GmmParams, conditional_log_density, gmm_conditional_mean, gmm_weighted_em,
)


def assert_monotone(trace):
    trace = np.asarray(trace)
    slack = MONOTONE_SLACK * np.maximum(1.0, np.abs(trace[1:]))
    assert np.all(np.diff(trace) >= -slack)


def correlated_points(n=2000, seed=0):
    return np.random.default_rng(seed).multivariate_normal([0.0, 1.0], [[1.0, 0.5], [0.5, 1.0]], size=n)


def two_clusters(seed=1):
    rng = np.random.default_rng(seed)
    a = rng.normal([-2.0, -2.0], 0.3, size=(300, 2))
    b = rng.normal([2.0, 3.0], 0.3, size=(300, 2))
    return np.vstack([a, b])


def random_mixture(rng):
    k = int(rng.integers(1, 6))
    factors = rng.normal(0.0, 0.7, size=(k, 2, 2))
    return GmmParams(k=k, weights=rng.dirichlet(np.ones(k)), means=rng.normal(0.0, 1.5, size=(k, 2)),
                     covariances=factors @ factors.transpose(0, 2, 1) + 0.25 * np.eye(2))


def quadrature_conditional_means(gmm, xs):
    """E[Y | x] as the ratio of adaptive-quadrature integrals of y p(x, y) and p(x, y)"""
    inverse = np.linalg.inv(gmm.covariances)
    scale = gmm.weights / (2.0 * np.pi * np.sqrt(np.linalg.det(gmm.covariances)))
    marginal = np.sum(gmm.weights * norm.pdf(xs[:, None], gmm.means[:, 0],
                                             np.sqrt(gmm.covariances[:, 0, 0])), axis=1)
    dx = xs[:, None] - gmm.means[None, :, 0]

    def integrand(y):
        dy = y - gmm.means[None, :, 1]
        quad_form = (inverse[:, 0, 0] * dx ** 2 + 2.0 * inverse[:, 0, 1] * dx * dy
                     + inverse[:, 1, 1] * dy ** 2)
        density = np.sum(scale * np.exp(-0.5 * quad_form), axis=1) / marginal
        return np.concatenate([density, y * density])

    slopes = gmm.covariances[:, 0, 1] / gmm.covariances[:, 0, 0]
    peaks = (gmm.means[None, :, 1] + slopes * dx).ravel()
    values, _ = quad_vec(integrand, float(peaks.min()) - 60.0, float(peaks.max()) + 60.0,
                         epsabs=1e-13, epsrel=1e-12, points=np.unique(peaks))
    return values[len(xs):] / values[:len(xs)]


class TestWeightedEm:
    """Tests for gmm_weighted_em"""

    def test_single_component_is_sample_moments(self):
        """k = 1 recovers the (biased) sample mean and covariance"""
        points = correlated_points()
        gmm = gmm_weighted_em(points, k=1)
        np.testing.assert_allclose(gmm.means[0], points.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(gmm.covariances[0], np.cov(points.T, bias=True), atol=1e-10)
        assert gmm.converged
        assert_monotone(gmm.loglik_trace)

    def test_integer_weights_match_repetition(self):
        """Weight 2 on a point equals listing it twice"""
        points = correlated_points(n=200, seed=3)
        weights = np.where(np.arange(200) % 2 == 0, 2.0, 1.0)
        repeated = np.vstack([points, points[weights == 2.0]])
        weighted = gmm_weighted_em(points, weights, k=1)
        plain = gmm_weighted_em(repeated, k=1)
        np.testing.assert_allclose(weighted.means, plain.means, atol=1e-10)
        np.testing.assert_allclose(weighted.covariances, plain.covariances, atol=1e-10)

    def test_two_clusters(self):
        """Separated clusters get one component each"""
        gmm = gmm_weighted_em(two_clusters(), k=2)
        order = np.argsort(gmm.means[:, 0])
        np.testing.assert_allclose(gmm.means[order], [[-2.0, -2.0], [2.0, 3.0]], atol=0.1)
        np.testing.assert_allclose(gmm.weights, [0.5, 0.5], atol=0.01)
        assert_monotone(gmm.loglik_trace)

    def test_monotone_on_mixed_data(self):
        """Log-likelihood never decreases with k = 5 and uneven weights"""
        rng = np.random.default_rng(4)
        x = rng.uniform(-3, 3, 800)
        points = np.column_stack([x, 1.0 + 0.5 * x - 0.2 * x ** 3 + rng.normal(0, 0.5, 800)])
        weights = rng.uniform(0.2, 3.0, 800)
        gmm = gmm_weighted_em(points, weights, k=5, max_iter=200)
        assert len(gmm.loglik_trace) == gmm.n_iter
        assert_monotone(gmm.loglik_trace)
        assert np.all(np.linalg.eigvalsh(gmm.covariances) > 0)

    def test_warm_start(self):
        """Starting from a converged fit converges quickly"""
        points = two_clusters()
        first = gmm_weighted_em(points, k=2)
        second = gmm_weighted_em(points, k=2, init=first)
        assert second.n_iter <= 3
        np.testing.assert_allclose(np.sort(second.means[:, 0]), np.sort(first.means[:, 0]), atol=1e-3)

    def test_too_many_components(self):
        """k larger than n"""
        with pytest.raises(EstimationError, match="cannot fit 5 components"):
            gmm_weighted_em(np.zeros((3, 2)), k=5)

    def test_non_positive_weights(self):
        """Zero weights are rejected"""
        with pytest.raises(EstimationError, match="positive"):
            gmm_weighted_em(correlated_points(10), np.zeros(10), k=1)

    def test_misaligned_weights(self):
        """One weight per point"""
        with pytest.raises(EstimationError, match="align"):
            gmm_weighted_em(correlated_points(10), np.ones(9), k=1)


class TestConditionals:
    """Tests for conditional means and densities"""

    def test_single_gaussian_regression_line(self):
        """One component: E[Y | x] is the regression line"""
        points = correlated_points()
        gmm = gmm_weighted_em(points, k=1)
        cov = np.cov(points.T, bias=True)
        mean = points.mean(axis=0)
        x = np.array([-1.0, 0.0, 2.0])
        expected = mean[1] + cov[0, 1] / cov[0, 0] * (x - mean[0])
        np.testing.assert_allclose(gmm_conditional_mean(gmm, x), expected, atol=1e-9)
        assert isinstance(gmm.conditional_mean(0.5), float)

    def test_cluster_means(self):
        """Conditional mean follows the cluster at each x"""
        gmm = gmm_weighted_em(two_clusters(), k=2)
        assert gmm_conditional_mean(gmm, -2.0) == pytest.approx(-2.0, abs=0.15)
        assert gmm_conditional_mean(gmm, 2.0) == pytest.approx(3.0, abs=0.15)

    def test_underflow_fallback(self):
        """Far from every component the nearest regression line is used"""
        gmm = gmm_weighted_em(two_clusters(), k=2)
        value, fallbacks = gmm_conditional_mean(gmm, 1000.0, return_fallback=True)
        assert fallbacks == 1
        assert np.isfinite(value)

    def test_no_fallback_inside(self):
        """No fallback near the data"""
        gmm = gmm_weighted_em(two_clusters(), k=2)
        _, fallbacks = gmm_conditional_mean(gmm, np.array([-2.0, 0.0, 2.0]), return_fallback=True)
        assert fallbacks == 0

    def test_conditional_density_integrates_to_one(self):
        """p(y | x) is a density in y"""
        gmm = gmm_weighted_em(two_clusters(), k=2)
        ys = np.linspace(-10, 15, 5001)
        for x in (-2.0, 0.0, 2.0):
            assert trapezoid(gmm.conditional_density(x, ys), ys) == pytest.approx(1.0, abs=1e-6)

    def test_conditional_log_density_shape(self):
        """(len(x), len(ys)) layout"""
        gmm = gmm_weighted_em(correlated_points(), k=1)
        assert conditional_log_density(gmm, np.zeros(3), np.zeros(4)).shape == (3, 4)

    def test_log_density_matches_scipy(self):
        """Joint log density of a single component"""
        points = correlated_points()
        gmm = gmm_weighted_em(points, k=1)
        expected = multivariate_normal.logpdf(points[:5], gmm.means[0], gmm.covariances[0])
        np.testing.assert_allclose(gmm.log_density(points[:5]), expected, rtol=1e-12)


class TestQuadratureOracle:
    """Conditional means against numerical integration of the joint density"""

    def test_random_mixtures(self):
        """50 random mixtures, 20 x values each, agree within 1e-6"""
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(50):
            gmm = random_mixture(rng)
            xs = rng.uniform(-3.0, 3.0, 20)
            means, fallbacks = gmm_conditional_mean(gmm, xs, return_fallback=True)
            assert fallbacks == 0
            worst = max(worst, float(np.max(np.abs(means - quadrature_conditional_means(gmm, xs)))))
        assert worst < 1e-6


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
