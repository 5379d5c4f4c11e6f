"""
Bivariate Gaussian mixtures over (x, y) fitted by weighted EM

The conditional mean E[Y | X = x] is analytic: each component contributes
a linear regression line, mixed by the components' posterior weight at x.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal, norm

from .errors import EstimationError

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-6
MONOTONE_SLACK = 1e-9


@dataclass
class GmmParams:
    k: int
    weights: np.ndarray          # (k,)
    means: np.ndarray            # (k, 2) as (x, y)
    covariances: np.ndarray      # (k, 2, 2)
    loglik_trace: List[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False

    def log_density(self, points: np.ndarray) -> np.ndarray:
        """log p(x, y) for an (n, 2) array"""
        points = np.atleast_2d(points)
        return logsumexp(self._component_logpdf(points) + np.log(self.weights), axis=1)

    def _component_logpdf(self, points: np.ndarray) -> np.ndarray:
        return np.column_stack([
            multivariate_normal.logpdf(points, mean=self.means[j], cov=self.covariances[j])
            for j in range(self.k)
        ])

    def conditional_mean(self, x, return_fallback: bool = False):
        return gmm_conditional_mean(self, x, return_fallback=return_fallback)

    def conditional_density(self, x: float, y: np.ndarray) -> np.ndarray:
        """p(y | x) evaluated on an array of y at a single x"""
        return np.exp(conditional_log_density(self, np.atleast_1d(float(x)), y)[0])


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    values, vectors = np.linalg.eigh(cov)
    values = np.maximum(values, EIGEN_FLOOR)
    return (vectors * values) @ vectors.T


def _weighted_moments(points: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    total = weights.sum()
    mean = weights @ points / total
    centered = points - mean
    cov = (centered * weights[:, None]).T @ centered / total
    return mean, cov


def _initial_params(points: np.ndarray, weights: np.ndarray, k: int) -> GmmParams:
    """Split units, ordered by x then y, into k groups of equal weight mass"""
    order = np.lexsort((points[:, 1], points[:, 0]))
    cumulative = np.cumsum(weights[order]) - 0.5 * weights[order]
    group = np.minimum((k * cumulative / weights.sum()).astype(int), k - 1)
    overall_mean, overall_cov = _weighted_moments(points, weights)

    means = np.empty((k, 2))
    covs = np.empty((k, 2, 2))
    mass = np.empty(k)
    for j in range(k):
        members = order[group == j]
        if members.size == 0:
            means[j], covs[j], mass[j] = overall_mean, overall_cov, 1e-3
            continue
        w = weights[members]
        means[j], cov = _weighted_moments(points[members], w)
        covs[j] = _floor_covariance(cov if members.size > 1 else overall_cov)
        mass[j] = w.sum()
    return GmmParams(k=k, weights=mass / mass.sum(), means=means, covariances=covs)


def gmm_weighted_em(points, weights=None, k: int = 5, tol: float = 1e-6,
                    max_iter: int = 500, init: Optional[GmmParams] = None) -> GmmParams:
    """
    Maximize sum_i w_i log sum_j pi_j N((x_i, y_i); mu_j, Sigma_j).

    The weighted log-likelihood is recorded after every M-step in
    loglik_trace and never decreases by more than MONOTONE_SLACK.

    Raises:
        EstimationError: If k exceeds the number of points or a weight is
            not positive
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if len(weights) != n:
        raise EstimationError("weights must align with points")
    if k < 1 or k > n:
        raise EstimationError(f"cannot fit {k} components to {n} points")
    if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
        raise EstimationError("EM weights must be positive and finite")

    if init is not None and init.k == k:
        params = GmmParams(k=k, weights=init.weights.copy(), means=init.means.copy(),
                           covariances=init.covariances.copy())
    else:
        params = _initial_params(points, weights, k)
    total = weights.sum()
    previous = -np.inf
    for iteration in range(1, max_iter + 1):
        joint = params._component_logpdf(points) + np.log(params.weights)
        log_norm = logsumexp(joint, axis=1, keepdims=True)
        resp = np.exp(joint - log_norm) * weights[:, None]

        mass = resp.sum(axis=0)
        mass = np.maximum(mass, 1e-12 * total)
        means = resp.T @ points / mass[:, None]
        covs = np.empty((k, 2, 2))
        for j in range(k):
            centered = points - means[j]
            covs[j] = _floor_covariance((centered * resp[:, j:j + 1]).T @ centered / mass[j])
        params = GmmParams(k=k, weights=mass / mass.sum(), means=means, covariances=covs,
                           loglik_trace=params.loglik_trace)

        current = float(weights @ params.log_density(points))
        params.loglik_trace.append(current)
        params.n_iter = iteration
        if current - previous <= tol * max(1.0, abs(current)):
            params.converged = True
            break
        previous = current

    logger.debug("weighted EM k=%d n=%d finished after %d iterations (converged=%s)",
                 k, n, params.n_iter, params.converged)
    return params


def _conditional_terms(gmm: GmmParams, x: np.ndarray):
    """Per-component log pi_j N(x; mu_x, s_xx), regression mean and residual variance"""
    mu_x = gmm.means[:, 0]
    mu_y = gmm.means[:, 1]
    s_xx = gmm.covariances[:, 0, 0]
    s_xy = gmm.covariances[:, 0, 1]
    s_yy = gmm.covariances[:, 1, 1]
    log_w = np.log(gmm.weights)[None, :] + norm.logpdf(x[:, None], loc=mu_x[None, :],
                                                       scale=np.sqrt(s_xx)[None, :])
    slope = s_xy / s_xx
    cond_mean = mu_y[None, :] + slope[None, :] * (x[:, None] - mu_x[None, :])
    cond_var = np.maximum(s_yy - s_xy ** 2 / s_xx, EIGEN_FLOOR)
    return log_w, cond_mean, np.broadcast_to(cond_var, cond_mean.shape)


def gmm_conditional_mean(gmm: GmmParams, x, return_fallback: bool = False):
    """
    E[Y | X = x] under the mixture.

    Weights are normalized in log space. Where every component's marginal
    density at x would underflow in linear space, the nearest component's
    regression line is used instead and the point is counted as a fallback.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    log_w, cond_mean, _ = _conditional_terms(gmm, x_arr)
    posterior = np.exp(log_w - logsumexp(log_w, axis=1, keepdims=True))
    result = np.sum(posterior * cond_mean, axis=1)

    underflow = np.max(log_w, axis=1) < np.log(np.finfo(float).tiny)
    if np.any(underflow):
        nearest = np.argmax(log_w[underflow], axis=1)
        result[underflow] = cond_mean[underflow, nearest]
        logger.warning("GMM conditional mean fell back to nearest component at %d x values",
                       int(underflow.sum()))
    value = float(result[0]) if np.ndim(x) == 0 else result
    if return_fallback:
        return value, int(underflow.sum())
    return value


def conditional_log_density(gmm: GmmParams, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """log p(y_j | x_i) as an (len(x), len(ys)) array"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    log_w, cond_mean, cond_var = _conditional_terms(gmm, x)
    log_w = log_w - logsumexp(log_w, axis=1, keepdims=True)
    parts = log_w[:, None, :] + norm.logpdf(ys[None, :, None], loc=cond_mean[:, None, :],
                                            scale=np.sqrt(cond_var)[:, None, :])
    return logsumexp(parts, axis=2)
