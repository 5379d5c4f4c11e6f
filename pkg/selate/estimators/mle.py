"""
Mixture-model maximum likelihood, optionally corrected for selection

With correction the observed density of arm t is modelled as
p(y | x, t) beta(x, y, t) / Z(x, t). Rounds alternate between gradient
steps on beta (mixtures frozen, Z by quadrature on a y-grid) and weighted
EM on the mixtures with weights 1 / beta.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import torch

from ..errors import EstimationError
from ..gmm import GmmParams, conditional_log_density, gmm_weighted_em
from ..model import AteEstimate, Dataset, Method
from ..nnet import as_tensor, train_adam
from ..scoring import BetaModel
from .assembly import FittedModels, estimate_ate
from .base import BaseEstimator, EstimationContext, EstimatorSettings

logger = logging.getLogger(__name__)

GRID_MARGIN_SD = 3.0


@dataclass
class MleFit:
    gmms: Dict[int, GmmParams]
    beta: Optional[BetaModel] = None
    beta_losses: List[float] = field(default_factory=list)
    clamped: int = 0


def _arm_grid(y: np.ndarray, points: int) -> np.ndarray:
    spread = float(np.std(y)) if len(y) > 1 else 1.0
    spread = spread if spread > 0 else 1.0
    return np.linspace(y.min() - GRID_MARGIN_SD * spread, y.max() + GRID_MARGIN_SD * spread, points)


class _BetaObjective:
    """
    Negative log-likelihood of the observed units under p * beta / Z plus
    lam * mean((log beta)^2), with the mixtures held fixed.
    """

    def __init__(self, observed_b: Dataset, gmms: Dict[int, GmmParams], beta: BetaModel,
                 lam: float, grid_points: int):
        self.beta = beta
        self.lam = lam
        obs_rows, grid_rows, log_q = [], [], []
        for arm in (0, 1):
            subset = observed_b.arm(arm)
            ys = _arm_grid(subset.y, grid_points)
            log_density = conditional_log_density(gmms[arm], subset.x, ys)
            log_density -= np.logaddexp.reduce(log_density, axis=1, keepdims=True)
            obs_rows.append(np.column_stack([subset.x, subset.y, np.full(len(subset), arm)]))
            grid_rows.append(np.column_stack([
                np.repeat(subset.x, len(ys)), np.tile(ys, len(subset)),
                np.full(len(subset) * len(ys), arm)]))
            log_q.append(log_density)
        self.grid_points = grid_points
        self.obs_inputs = as_tensor(np.vstack(obs_rows))
        self.grid_inputs = as_tensor(np.vstack(grid_rows))
        self.log_q = as_tensor(np.vstack(log_q))

    def __call__(self) -> torch.Tensor:
        log_beta_obs = self.beta.log_beta(self.obs_inputs)
        log_beta_grid = self.beta.log_beta(self.grid_inputs).reshape(-1, self.grid_points)
        log_z = torch.logsumexp(self.log_q + log_beta_grid, dim=1)
        return torch.mean(log_z - log_beta_obs) + self.lam * torch.mean(log_beta_obs ** 2)


def _fit_arms(observed_b: Dataset, settings: EstimatorSettings,
              weights: Optional[Dict[int, np.ndarray]] = None,
              init: Optional[Dict[int, GmmParams]] = None) -> Dict[int, GmmParams]:
    gmms = {}
    for arm in (0, 1):
        subset = observed_b.arm(arm)
        if len(subset) < settings.k:
            raise EstimationError(f"mle: arm {arm} has {len(subset)} units in region B, "
                                  f"fewer than k={settings.k}")
        gmms[arm] = gmm_weighted_em(subset.points, None if weights is None else weights[arm],
                                    k=settings.k, tol=settings.em_tol,
                                    max_iter=settings.em_max_iter,
                                    init=None if init is None else init[arm])
    return gmms


def fit_mle(observed_b: Dataset, k: int = 5, correction: bool = False,
            settings: EstimatorSettings = None, lam: float = None,
            rounds: int = None, seed: int = 0) -> MleFit:
    """
    Fit per-arm mixtures on region-B data; with correction also learn beta.

    Args:
        observed_b: Observed units inside region B
        k: Mixture components per arm
        correction: Learn selection weights and refit by weighted EM
        settings: Remaining hyperparameters (beta steps, grid, EM tolerances)
        lam: Weight of the (log beta)^2 regularizer
        rounds: Alternation rounds
        seed: Initialization seed of the beta network

    Returns:
        MleFit with per-arm GmmParams and, when correcting, the BetaModel
    """
    settings = settings or EstimatorSettings(k=k)
    if settings.k != k:
        settings = replace(settings, k=k)
    lam = settings.lam if lam is None else lam
    rounds = settings.mle_rounds if rounds is None else rounds

    gmms = _fit_arms(observed_b, settings)
    if not correction:
        return MleFit(gmms=gmms)

    beta = BetaModel(settings.beta_hidden, init_seed=seed + 211)
    losses: List[float] = []
    clamped = 0
    for round_index in range(rounds):
        objective = _BetaObjective(observed_b, gmms, beta, lam, settings.mle_grid_points)
        losses.extend(train_adam([beta.net], objective, steps=settings.beta_steps,
                                 lr=settings.beta_lr, label="mle selection weights"))
        weights = {}
        for arm in (0, 1):
            subset = observed_b.arm(arm)
            arm_beta, outside = beta.clamped(subset.x, subset.y, arm)
            clamped += outside
            weights[arm] = 1.0 / arm_beta
        gmms = _fit_arms(observed_b, settings, weights, init=gmms)
        logger.debug("mle+beta round %d/%d objective %.6g", round_index + 1, rounds,
                     losses[-1] if losses else float("nan"))
    return MleFit(gmms=gmms, beta=beta, beta_losses=losses, clamped=clamped)


class MleEstimator(BaseEstimator):
    """Per-arm mixture MLE without selection correction"""

    method = Method.MLE
    correction = False

    def fit(self, context: EstimationContext) -> 'MleEstimator':
        self.result = fit_mle(context.observed_b, k=self.settings.k, correction=self.correction,
                              settings=self.settings, seed=context.seed)
        self.fitted = True
        return self

    def fitted_models(self) -> FittedModels:
        self._require_fitted()
        gmms = self.result.gmms
        models = FittedModels(mu={arm: gmms[arm].conditional_mean for arm in (0, 1)},
                              beta=self.result.beta)
        models.diagnostics["em_iterations"] = float(sum(g.n_iter for g in gmms.values()))
        if self.result.beta_losses:
            models.diagnostics["final_loss"] = self.result.beta_losses[-1]
        if self.result.clamped:
            models.flags.append("beta_clamped")
        return models

    def estimate(self, context: EstimationContext) -> AteEstimate:
        return estimate_ate(self.method, context.observed, context.prop_model,
                            context.regions, self.fitted_models())


class MleBetaEstimator(MleEstimator):
    """Mixture MLE with learned selection weights"""

    method = Method.MLE_BETA
    correction = True
