"""
Score-matching estimators (plain and with learned selection weights)
"""

from ..errors import EstimationError
from ..model import AteEstimate, Method
from ..scoring import fit_score_model, score_conditional_mean
from .assembly import FittedModels, estimate_ate
from .base import BaseEstimator, EstimationContext


class ScoreEstimator(BaseEstimator):
    """Per-arm score networks integrated to conditional means"""

    method = Method.SM
    correction = False

    def fit(self, context: EstimationContext) -> 'ScoreEstimator':
        self.models = fit_score_model(context.observed_b, correction=self.correction,
                                      lam1=self.settings.lam1, lam2=self.settings.lam2,
                                      train_cfg=self.settings.score, seed=context.seed)
        self.fitted = True
        return self

    def fitted_models(self) -> FittedModels:
        self._require_fitted()
        fitted = FittedModels(beta=self.models[1].beta)
        flagged = {"count": 0}

        def conditional_mean(arm):
            def mu(x):
                means, count = score_conditional_mean(self.models[arm], x, return_flags=True)
                flagged["count"] += count
                return means
            return mu

        fitted.mu = {arm: conditional_mean(arm) for arm in (0, 1)}
        trace = self.models[0].loss_trace
        if trace:
            fitted.diagnostics["final_loss"] = trace[-1]
        self._flagged = flagged
        return fitted

    def estimate(self, context: EstimationContext) -> AteEstimate:
        """
        Raises:
            EstimationError: If some conditional mean still has density mass
                at the widened grid's edge
        """
        result = estimate_ate(self.method, context.observed, context.prop_model,
                              context.regions, self.fitted_models())
        if self._flagged["count"]:
            raise EstimationError(f"{self.method}: integration grid misses density mass "
                                  f"at {self._flagged['count']} x values")
        return result


class ScoreBetaEstimator(ScoreEstimator):
    """Score matching on the composite score with a learned beta"""

    method = Method.SM_BETA
    correction = True
