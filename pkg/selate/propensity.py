"""
Observed-data propensity score with isotonic calibration and overlap regions
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Tuple, Union

import numpy as np
import torch
from sklearn.isotonic import IsotonicRegression
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import StratifiedKFold

from .errors import ConfigError, EstimationError
from .model import Dataset
from .nnet import Activation, Mlp, as_tensor, train_adam

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class ClassifierKind:
    MLP = "mlp"
    LOGISTIC = "logistic"

    ALL = (MLP, LOGISTIC)


@dataclass(frozen=True)
class PropensityConfig:
    classifier: str = ClassifierKind.MLP
    hidden: Tuple[int, ...] = (32, 32)
    folds: int = 5
    iterations: int = 2000
    lr: float = 0.01

    def validate(self) -> None:
        if self.classifier not in ClassifierKind.ALL:
            raise ConfigError(f"unknown propensity classifier '{self.classifier}'. "
                              f"Available: {', '.join(ClassifierKind.ALL)}")
        if self.folds < 2:
            raise ConfigError(f"calibration needs at least 2 folds, got {self.folds}")
        if self.iterations < 0:
            raise ConfigError("propensity iterations must be non-negative")


class _MlpScorer:
    """ReLU network on standardized x trained with logistic loss"""

    def __init__(self, cfg: PropensityConfig, seed: int):
        self.cfg = cfg
        self.net = Mlp([1, *cfg.hidden, 1], activation=Activation.RELU, init_seed=seed)
        self.center = 0.0
        self.scale = 1.0

    def _inputs(self, x: np.ndarray) -> torch.Tensor:
        return as_tensor((np.asarray(x, dtype=float) - self.center) / self.scale).reshape(-1, 1)

    def fit(self, x: np.ndarray, t: np.ndarray) -> '_MlpScorer':
        self.center = float(np.mean(x))
        spread = float(np.std(x))
        self.scale = spread if spread > 0 else 1.0
        inputs = self._inputs(x)
        targets = as_tensor(t).reshape(-1, 1)
        loss_fn = torch.nn.BCEWithLogitsLoss()
        train_adam([self.net], lambda: loss_fn(self.net(inputs), targets),
                   steps=self.cfg.iterations, lr=self.cfg.lr, label="propensity")
        return self

    def raw(self, x: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.net(self._inputs(x)).reshape(-1).numpy()


class _LogisticScorer:
    """Affine score from a logistic regression (no hidden layers)"""

    def __init__(self, cfg: PropensityConfig, seed: int):
        self.model = LogisticRegression(random_state=seed % (2 ** 32))

    def fit(self, x: np.ndarray, t: np.ndarray) -> '_LogisticScorer':
        self.model.fit(np.asarray(x, dtype=float).reshape(-1, 1), t)
        return self

    def raw(self, x: np.ndarray) -> np.ndarray:
        return self.model.decision_function(np.asarray(x, dtype=float).reshape(-1, 1))


def _make_scorer(cfg: PropensityConfig, seed: int):
    if cfg.classifier == ClassifierKind.LOGISTIC:
        return _LogisticScorer(cfg, seed)
    return _MlpScorer(cfg, seed)


@dataclass
class PropensityModel:
    """Raw classifier score followed by a non-decreasing isotonic calibrator"""
    classifier: object
    calibrator: IsotonicRegression
    config: PropensityConfig = field(default_factory=PropensityConfig)

    def raw_score(self, x: ArrayLike) -> np.ndarray:
        return self.classifier.raw(np.atleast_1d(np.asarray(x, dtype=float)))

    def predict(self, x: ArrayLike) -> ArrayLike:
        e_hat = np.clip(self.calibrator.predict(self.raw_score(x)), 0.0, 1.0)
        return float(e_hat[0]) if np.ndim(x) == 0 else e_hat


def fit_propensity(observed: Dataset, folds: int = 5,
                   train_cfg: PropensityConfig = None, seed: int = 0) -> PropensityModel:
    """
    Fit x -> t, then calibrate on pooled out-of-fold raw scores.

    Raises:
        EstimationError: If only one treatment arm is present, or an arm has
            fewer units than folds
    """
    cfg = train_cfg or PropensityConfig(folds=folds)
    cfg.validate()
    x = np.asarray(observed.x, dtype=float)
    t = np.asarray(observed.t, dtype=np.int64)
    counts = np.bincount(t, minlength=2) if len(t) else np.zeros(2, dtype=int)
    if counts.min() == 0:
        raise EstimationError("cannot fit propensity: degenerate treatment")
    if counts.min() < folds:
        raise EstimationError(f"cannot fit propensity: an arm has fewer than {folds} units")

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed % (2 ** 32))
    out_of_fold = np.empty(len(x))
    for fold, (train_idx, test_idx) in enumerate(splitter.split(x.reshape(-1, 1), t)):
        scorer = _make_scorer(cfg, seed + fold + 1).fit(x[train_idx], t[train_idx])
        out_of_fold[test_idx] = scorer.raw(x[test_idx])

    calibrator = IsotonicRegression(y_min=0.0, y_max=1.0, increasing=True, out_of_bounds='clip')
    calibrator.fit(out_of_fold, t)
    final = _make_scorer(cfg, seed).fit(x, t)
    logger.debug("propensity fitted on %d units (%s, %d folds)", len(x), cfg.classifier, folds)
    return PropensityModel(classifier=final, calibrator=calibrator, config=cfg)


def predict(model: PropensityModel, x: ArrayLike) -> ArrayLike:
    return model.predict(x)


@dataclass
class OverlapRegions:
    """
    Index sets over the observed units.

    s1 holds e_hat >= c, s0 holds e_hat <= 1 - c, and b is their
    intersection, so units sitting exactly on a threshold belong to b.
    """
    c: float
    e_hat: np.ndarray
    s1_indices: np.ndarray
    s0_indices: np.ndarray
    b_indices: np.ndarray

    def indices_for(self, arm: int) -> np.ndarray:
        return self.s1_indices if arm == 1 else self.s0_indices


def _check_threshold(c: float) -> None:
    if not 0.0 < c < 0.5:
        raise ConfigError(f"overlap threshold c must lie in (0, 1/2), got {c}")


def overlap_filter(observed: Dataset, model: PropensityModel, c: float = 0.05) -> OverlapRegions:
    _check_threshold(c)
    e_hat = model.predict(observed.x) if len(observed) else np.zeros(0)
    e_hat = np.asarray(e_hat, dtype=float)
    in_s1 = e_hat >= c
    in_s0 = e_hat <= 1.0 - c
    return OverlapRegions(
        c=c,
        e_hat=e_hat,
        s1_indices=np.flatnonzero(in_s1),
        s0_indices=np.flatnonzero(in_s0),
        b_indices=np.flatnonzero(in_s1 & in_s0),
    )


def region_predicate(model: PropensityModel, c: float) -> Callable[[ArrayLike], ArrayLike]:
    """x -> c < e_hat(x) < 1 - c"""
    _check_threshold(c)

    def contains(x: ArrayLike) -> ArrayLike:
        e_hat = model.predict(x)
        return (e_hat > c) & (e_hat < 1.0 - c)

    return contains
