"""
Base estimator interface and the shared estimation context
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, EstimationError
from ..model import AteEstimate, Dataset
from ..propensity import OverlapRegions, PropensityConfig, PropensityModel, fit_propensity
from ..scoring import GridSpec, ScoreTrainConfig


class HeckmanMode:
    POPULATION = "population"
    PROXY = "proxy"

    ALL = (POPULATION, PROXY)


@dataclass(frozen=True)
class EstimatorSettings:
    """Hyperparameters shared by all estimators"""
    k: int = 5
    em_tol: float = 1e-6
    em_max_iter: int = 500
    lam: float = 0.05
    lam1: float = 0.05
    lam2: float = 0.05
    mle_rounds: int = 10
    beta_steps: int = 200
    beta_lr: float = 0.01
    beta_hidden: int = 10
    mle_grid_points: int = 96
    poly_degree: int = 3
    score: ScoreTrainConfig = field(default_factory=ScoreTrainConfig)
    heckman_mode: str = HeckmanMode.POPULATION
    aipw_clip: float = 0.01

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"GMM component count must be positive, got {self.k}")
        if self.mle_rounds < 0 or self.beta_steps < 0 or self.score.steps < 0:
            raise ConfigError("training rounds and steps must be non-negative")
        if self.heckman_mode not in HeckmanMode.ALL:
            raise ConfigError(f"unknown heckman mode '{self.heckman_mode}'. "
                              f"Available: {', '.join(HeckmanMode.ALL)}")
        if not 0.0 < self.aipw_clip < 0.5:
            raise ConfigError(f"aipw clip must lie in (0, 1/2), got {self.aipw_clip}")
        if self.mle_grid_points < 2:
            raise ConfigError("MLE normalization grid needs at least 2 points")
        self.score.grid.validate()

    @property
    def grid(self) -> GridSpec:
        return self.score.grid


@dataclass
class EstimationContext:
    """
    Everything an estimator may read for one seed.

    population and selection_mask are only set when the harness exposes the
    unselected data (oracle baselines and Heckman's population mode).
    """
    observed: Dataset
    prop_model: Optional[PropensityModel]
    regions: Optional[OverlapRegions]
    settings: EstimatorSettings = field(default_factory=EstimatorSettings)
    seed: int = 0
    population: Optional[Dataset] = None
    selection_mask: Optional[np.ndarray] = None
    propensity_config: PropensityConfig = field(default_factory=PropensityConfig)
    _population_propensity: Optional[PropensityModel] = field(default=None, repr=False)

    @property
    def observed_b(self) -> Dataset:
        if self.regions is None:
            raise EstimationError("overlap regions have not been computed")
        return self.observed.subset(self.regions.b_indices)

    def population_propensity(self) -> PropensityModel:
        if self.population is None:
            raise EstimationError("no population data available for the oracle propensity")
        if self._population_propensity is None:
            self._population_propensity = fit_propensity(
                self.population, self.propensity_config.folds, self.propensity_config, seed=self.seed)
        return self._population_propensity


class BaseEstimator(ABC):
    """Abstract base class for ATE estimators"""

    method: str = ""

    def __init__(self, settings: EstimatorSettings = None):
        self.settings = settings or EstimatorSettings()
        self.fitted = False

    @abstractmethod
    def fit(self, context: EstimationContext) -> 'BaseEstimator':
        """
        Fit the estimator's models on the context's data.

        Args:
            context: Observed data, propensity model and overlap regions

        Returns:
            self
        """
        pass

    @abstractmethod
    def estimate(self, context: EstimationContext) -> AteEstimate:
        """Produce the ATE estimate from fitted models"""
        pass

    def run(self, context: EstimationContext) -> AteEstimate:
        return self.fit(context).estimate(context)

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise EstimationError(f"{self.method}: missing fitted model, call fit() first")
