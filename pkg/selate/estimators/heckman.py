"""
Heckman two-step selection correction

Step 1: probit of the selection indicator on (1, x, t). Step 2: per-arm
OLS of y on (1, x, inverse Mills ratio). The effect is the difference of
the arms' linear parts averaged over the observed x.

With no exclusion restriction the Mills ratio is identified only through
its curvature in x. Arms where it is nearly linear in x are rejected.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import statsmodels.api as sm
from scipy.stats import norm
from statsmodels.stats.outliers_influence import variance_inflation_factor

from ..errors import EstimationError
from ..model import AteEstimate, Dataset, Method
from ..rng import new_rng
from .base import BaseEstimator, EstimationContext, HeckmanMode

logger = logging.getLogger(__name__)

PROBIT_MAX_ITER = 100
# above this the Mills column is close to a linear function of x within an arm
MAX_MILLS_VIF = 1000.0


def inverse_mills(z):
    """phi(z) / Phi(z), computed in log space"""
    value = np.exp(norm.logpdf(z) - norm.logcdf(z))
    return float(value) if np.ndim(z) == 0 else value


@dataclass
class HeckmanFit:
    probit_coeffs: np.ndarray
    outcome_coeffs: Dict[int, np.ndarray]
    probit_loglik_trace: List[float] = field(default_factory=list)
    mode: str = HeckmanMode.POPULATION


def _design(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(x)), x, t]).astype(float)


def fit_probit(selected: np.ndarray, exog: np.ndarray) -> Tuple[np.ndarray, List[float]]:
    """
    Probit by Newton's method, recording the log-likelihood per iteration.

    Raises:
        EstimationError: If Newton does not converge within 100 steps
    """
    model = sm.Probit(np.asarray(selected, dtype=float), exog)
    trace: List[float] = [float(model.loglike(np.zeros(exog.shape[1])))]
    try:
        result = model.fit(method='newton', maxiter=PROBIT_MAX_ITER, disp=0,
                           callback=lambda params: trace.append(float(model.loglike(params))))
    except Exception as exc:
        raise EstimationError(f"probit selection equation failed: {exc}") from exc
    if not result.mle_retvals.get('converged', False):
        raise EstimationError(f"probit did not converge after {PROBIT_MAX_ITER} Newton steps")
    return np.asarray(result.params, dtype=float), trace


def mills_inflation(regressors: np.ndarray) -> float:
    """Variance inflation of the last column of a step-2 design (inf when collinear)"""
    with np.errstate(divide='ignore', invalid='ignore'):
        value = float(variance_inflation_factor(regressors, regressors.shape[1] - 1))
    # round-off can push R^2 past 1 for an exactly collinear column
    return value if np.isfinite(value) and value > 0.0 else float('inf')


def _proxy_selection_sample(observed: Dataset, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Observed units (S=1) stacked with a reference draw (S=0) spread uniformly
    over the observed x-range, with the observed treatment rate.
    """
    rng = new_rng(seed).spawn("heckman-proxy")
    n = len(observed)
    x_ref = rng.uniform(float(observed.x.min()), float(observed.x.max()), n)
    t_ref = rng.bernoulli(np.full(n, float(np.mean(observed.t))))
    exog = np.vstack([_design(observed.x, observed.t), _design(x_ref, t_ref)])
    selected = np.concatenate([np.ones(n), np.zeros(n)])
    return selected, exog


def heckman_ate(observed: Dataset, population: Optional[Dataset] = None,
                selection_mask: Optional[np.ndarray] = None,
                mode: str = HeckmanMode.POPULATION,
                seed: int = 0) -> Tuple[AteEstimate, HeckmanFit]:
    """
    Two-step Heckman estimate.

    Args:
        observed: Selected units
        population: Unselected population (covariates and treatment used)
        selection_mask: Keep indicator per population unit
        mode: 'population' uses population + mask; 'proxy' contrasts the
            observed units with a uniform reference sample and is flagged
        seed: Seed of the proxy reference sample

    Raises:
        EstimationError: On a missing arm, missing population data in
            population mode, probit non-convergence, or a Mills column
            whose variance inflation exceeds MAX_MILLS_VIF
    """
    for arm in (0, 1):
        if np.sum(observed.t == arm) < 3:
            raise EstimationError(f"heckman: arm {arm} has fewer than 3 observed units")

    flags = []
    if mode == HeckmanMode.POPULATION:
        if population is None or selection_mask is None:
            raise EstimationError("heckman population mode needs the population and its selection mask")
        selected = np.asarray(selection_mask, dtype=float)
        exog = _design(population.x, population.t)
    else:
        selected, exog = _proxy_selection_sample(observed, seed)
        flags.append("heckman_proxy")
        logger.warning("heckman: no population covariates, using a uniform reference sample")

    gamma, trace = fit_probit(selected, exog)
    mills = inverse_mills(_design(observed.x, observed.t) @ gamma)

    outcome_coeffs, mills_vif = {}, {}
    for arm in (0, 1):
        in_arm = observed.t == arm
        regressors = np.column_stack([np.ones(in_arm.sum()), observed.x[in_arm], mills[in_arm]])
        mills_vif[arm] = mills_inflation(regressors)
        if not mills_vif[arm] <= MAX_MILLS_VIF:
            raise EstimationError(f"heckman: step-2 design is ill-conditioned in arm {arm} "
                                  f"(Mills ratio variance inflation {mills_vif[arm]:.3g} > "
                                  f"{MAX_MILLS_VIF:g})")
        outcome_coeffs[arm] = np.asarray(sm.OLS(observed.y[in_arm], regressors).fit().params)

    intercept_gap = outcome_coeffs[1][0] - outcome_coeffs[0][0]
    slope_gap = outcome_coeffs[1][1] - outcome_coeffs[0][1]
    value = float(np.mean(intercept_gap + slope_gap * observed.x))
    fit = HeckmanFit(probit_coeffs=gamma, outcome_coeffs=outcome_coeffs,
                     probit_loglik_trace=trace, mode=mode)
    estimate = AteEstimate(method=Method.HECKMAN, value=value, n_used=len(observed),
                           diagnostics={"probit_iterations": float(len(trace) - 1),
                                        "mills_coef_treated": float(outcome_coeffs[1][2]),
                                        "mills_coef_control": float(outcome_coeffs[0][2]),
                                        "mills_vif_treated": mills_vif[1],
                                        "mills_vif_control": mills_vif[0]},
                           flags=flags)
    return estimate, fit


class HeckmanEstimator(BaseEstimator):
    """Classical two-step correction (linear outcome, probit selection)"""

    method = Method.HECKMAN

    def fit(self, context: EstimationContext) -> 'HeckmanEstimator':
        self.result, self.heckman_fit = heckman_ate(
            context.observed, context.population, context.selection_mask,
            mode=self.settings.heckman_mode, seed=context.seed)
        self.fitted = True
        return self

    def estimate(self, context: EstimationContext) -> AteEstimate:
        self._require_fitted()
        return self.result
