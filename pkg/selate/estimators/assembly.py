"""
Plug-in ATE assembly over the overlap region

tau = sum_i w_i (mu_1(x_i) - mu_0(x_i)) / sum_i w_i over region-B units,
with w_i = 1 / beta(x_i, y_i, t_i) for selection-corrected methods.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from ..errors import EstimationError
from ..model import AteEstimate, Dataset, Method
from ..propensity import OverlapRegions, PropensityModel
from ..scoring import BetaModel

ConditionalMean = Callable[[np.ndarray], np.ndarray]

REWEIGHTED_METHODS = (Method.MLE_BETA, Method.SM_BETA)


@dataclass
class FittedModels:
    """Per-arm conditional-mean functions and the optional selection weights"""
    mu: Dict[int, ConditionalMean] = field(default_factory=dict)
    beta: Optional[BetaModel] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)


def weighted_effect(mu1: np.ndarray, mu0: np.ndarray, weights: np.ndarray) -> float:
    weights = np.asarray(weights, dtype=float)
    if weights.size == 0 or weights.sum() <= 0:
        raise EstimationError("cannot average an effect with no positive weight")
    return float(np.sum(weights * (np.asarray(mu1) - np.asarray(mu0))) / weights.sum())


def estimate_ate(method: str, observed: Dataset, prop_model: Optional[PropensityModel],
                 regions: OverlapRegions, fitted: Optional[FittedModels]) -> AteEstimate:
    """
    Assemble the ATE from fitted per-arm models.

    IPW is handled separately: it is the difference of the two weighted arm
    means and never evaluates a conditional-mean model.
    """
    if method == Method.IPW:
        from .ipw import ipw_arm_mean
        treated = ipw_arm_mean(observed, prop_model, 1, regions)
        control = ipw_arm_mean(observed, prop_model, 0, regions)
        n_used = len(np.union1d(regions.s1_indices[observed.t[regions.s1_indices] == 1],
                                regions.s0_indices[observed.t[regions.s0_indices] == 0]))
        return AteEstimate(method=method, value=treated - control, n_used=n_used,
                           diagnostics={"treated_mean": treated, "control_mean": control})

    if fitted is None or 0 not in fitted.mu or 1 not in fitted.mu:
        raise EstimationError(f"{method}: missing fitted model")
    b = regions.b_indices
    if b.size == 0:
        raise EstimationError(f"{method}: overlap region B is empty")

    x_b = observed.x[b]
    diagnostics = dict(fitted.diagnostics)
    flags = list(fitted.flags)
    if method in REWEIGHTED_METHODS:
        if fitted.beta is None:
            raise EstimationError(f"{method}: missing fitted selection weights")
        beta, clamped = fitted.beta.clamped(x_b, observed.y[b], observed.t[b])
        if clamped:
            flags.append("beta_clamped")
            diagnostics["beta_clamped"] = float(clamped)
        weights = 1.0 / beta
    else:
        weights = np.ones(b.size)

    value = weighted_effect(fitted.mu[1](x_b), fitted.mu[0](x_b), weights)
    diagnostics["kept_fraction"] = b.size / max(len(observed), 1)
    return AteEstimate(method=method, value=value, n_used=int(b.size),
                       diagnostics=diagnostics, flags=flags)
