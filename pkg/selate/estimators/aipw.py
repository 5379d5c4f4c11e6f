"""
Augmented inverse propensity weighting (doubly robust)
"""

import logging
from typing import Callable, Dict

import numpy as np

from ..errors import EstimationError
from ..model import AteEstimate, Dataset, Method
from .base import BaseEstimator, EstimationContext
from .poly import polynomial_fit, polynomial_mu

logger = logging.getLogger(__name__)


def fit_outcome_models(data: Dataset, degree: int = 3) -> Dict[int, Callable]:
    """Per-arm polynomial regressions as conditional-mean callables"""
    models = {}
    for arm in (0, 1):
        coeffs = polynomial_fit(data.arm(arm), degree)
        models[arm] = lambda x, c=coeffs: polynomial_mu(c, x)
    return models


def aipw_ate(data: Dataset, prop_model, outcome_models: Dict[int, Callable],
             oracle: bool = False, clip: float = 0.01) -> AteEstimate:
    """
    Mean of the doubly robust score
    mu1 - mu0 + t (y - mu1) / e - (1 - t) (y - mu0) / (1 - e)
    over `data`. Propensities are clipped to [clip, 1 - clip].
    """
    e_hat = np.asarray(prop_model.predict(data.x), dtype=float)
    clipped = int(np.sum((e_hat < clip) | (e_hat > 1.0 - clip)))
    if clipped:
        logger.warning("aipw: clipped %d propensities into [%g, %g]", clipped, clip, 1.0 - clip)
    e_hat = np.clip(e_hat, clip, 1.0 - clip)

    mu1 = np.asarray(outcome_models[1](data.x), dtype=float)
    mu0 = np.asarray(outcome_models[0](data.x), dtype=float)
    t = data.t
    scores = mu1 - mu0 + t * (data.y - mu1) / e_hat - (1 - t) * (data.y - mu0) / (1.0 - e_hat)
    estimate = AteEstimate(method=Method.AIPW_ORACLE if oracle else Method.AIPW,
                           value=float(np.mean(scores)), n_used=len(data),
                           diagnostics={"clipped": float(clipped)})
    if clipped:
        estimate.flag("propensity_clipped")
    return estimate


class AipwEstimator(BaseEstimator):
    """AIPW on the selected data, no selection correction"""

    method = Method.AIPW
    oracle = False

    def _working(self, context: EstimationContext):
        return context.observed, context.prop_model

    def fit(self, context: EstimationContext) -> 'AipwEstimator':
        data, self.prop_model = self._working(context)
        self.outcome_models = fit_outcome_models(data, self.settings.poly_degree)
        self.fitted = True
        return self

    def estimate(self, context: EstimationContext) -> AteEstimate:
        self._require_fitted()
        data, _ = self._working(context)
        return aipw_ate(data, self.prop_model, self.outcome_models, oracle=self.oracle,
                        clip=self.settings.aipw_clip)


class AipwOracleEstimator(AipwEstimator):
    """AIPW on the full unselected population (reference bound)"""

    method = Method.AIPW_ORACLE
    oracle = True

    def _working(self, context: EstimationContext):
        if context.population is None:
            raise EstimationError("aipw_oracle: population data is not available")
        return context.population, context.population_propensity()
