"""
Inverse propensity weighting on the selected data, restricted to overlap
"""

from typing import Optional

import numpy as np

from ..errors import EstimationError
from ..model import AteEstimate, Dataset, Method
from ..propensity import OverlapRegions, PropensityModel
from .assembly import estimate_ate
from .base import BaseEstimator, EstimationContext


def ipw_arm_mean(observed: Dataset, prop_model: Optional[PropensityModel], arm: int,
                 regions: OverlapRegions) -> float:
    """
    Weighted mean of y over region S_arm units that received `arm`,
    w_i = 1 / P(T = arm | x_i).

    Raises:
        EstimationError: If no unit of that arm lies in its overlap region
    """
    index = regions.indices_for(arm)
    index = index[observed.t[index] == arm]
    if index.size == 0:
        raise EstimationError(f"no overlap support for arm {arm}")
    if regions.e_hat is not None and len(regions.e_hat) == len(observed):
        e_hat = regions.e_hat[index]
    else:
        e_hat = np.asarray(prop_model.predict(observed.x[index]), dtype=float)
    p_arm = e_hat if arm == 1 else 1.0 - e_hat
    weights = 1.0 / p_arm
    return float(np.sum(weights * observed.y[index]) / np.sum(weights))


class IpwEstimator(BaseEstimator):
    """Difference of IPW arm means; no outcome model, no selection correction"""

    method = Method.IPW

    def fit(self, context: EstimationContext) -> 'IpwEstimator':
        if context.regions is None:
            raise EstimationError("ipw: overlap regions are required")
        self.fitted = True
        return self

    def estimate(self, context: EstimationContext) -> AteEstimate:
        self._require_fitted()
        return estimate_ate(self.method, context.observed, context.prop_model,
                            context.regions, None)
