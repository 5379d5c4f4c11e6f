"""
Selection-weight network and score-matching outcome models

BetaModel maps (x, y, t) to a positive selection weight exp(MLP). A
ScoreModel holds one arm's score s(x, y) ~ d/dy log p(y | x) and turns it
into a conditional mean by integrating the score on a y-grid. The score is
a Gaussian term in y, with mean and precision learned over x, plus a
bounded residual network, so the integrated log-density always decays in
the tails.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from scipy.special import softmax

from .errors import ConfigError, EstimationError
from .model import Dataset
from .nnet import Activation, Mlp, as_tensor, d_dy, train_adam

logger = logging.getLogger(__name__)

BETA_MIN = 1e-4
BETA_MAX = 1e4
BOUNDARY_RATIO = 1e-3
CHUNK = 256
# standardized units: precision in [e^-6, e^6], residual score in +-RESIDUAL_BOUND
LOG_PRECISION_BOUND = 6.0
RESIDUAL_BOUND = 3.0


@dataclass(frozen=True)
class GridSpec:
    y_min: float = -10.0
    y_max: float = 15.0
    points: int = 400

    def validate(self) -> None:
        if not self.y_min < self.y_max or self.points < 2:
            raise ConfigError(f"invalid integration grid [{self.y_min}, {self.y_max}] x {self.points}")

    @property
    def step(self) -> float:
        return (self.y_max - self.y_min) / (self.points - 1)

    def values(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.points)

    def widened(self) -> 'GridSpec':
        """Half the width added on each side at the same spacing"""
        half = 0.5 * (self.y_max - self.y_min)
        return GridSpec(self.y_min - half, self.y_max + half, 2 * (self.points - 1) + 1)

    def shifted(self, offset: float) -> 'GridSpec':
        return GridSpec(self.y_min + offset, self.y_max + offset, self.points)


class BetaModel:
    """beta(x, y, t) = exp(MLP([x, y, t])), one Tanh hidden layer"""

    def __init__(self, hidden: int = 10, init_seed: int = 0):
        self.net = Mlp([3, hidden, 1], activation=Activation.TANH, init_seed=init_seed)
        # start from beta == 1
        with torch.no_grad():
            self.net.linear_layers[-1].weight.zero_()

    def log_beta(self, inputs: torch.Tensor) -> torch.Tensor:
        return self.net(inputs).reshape(-1)

    def predict(self, x, y, t) -> np.ndarray:
        inputs = np.column_stack([np.atleast_1d(x), np.atleast_1d(y),
                                  np.broadcast_to(np.atleast_1d(t), np.shape(np.atleast_1d(x)))])
        with torch.no_grad():
            return torch.exp(self.log_beta(as_tensor(inputs))).numpy()

    def clamped(self, x, y, t) -> Tuple[np.ndarray, int]:
        """Weights clipped to [BETA_MIN, BETA_MAX] and the number clipped"""
        beta = self.predict(x, y, t)
        outside = int(np.sum((beta < BETA_MIN) | (beta > BETA_MAX) | ~np.isfinite(beta)))
        beta = np.clip(np.nan_to_num(beta, nan=1.0, posinf=BETA_MAX), BETA_MIN, BETA_MAX)
        if outside:
            logger.warning("clamped %d selection weights into [%g, %g]", outside, BETA_MIN, BETA_MAX)
        return beta, outside

    def parameters(self):
        return self.net.parameters()


class _Standardizer:
    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.center = as_tensor([np.mean(x), np.mean(y)])
        spread = np.array([np.std(x), np.std(y)])
        self.scale = as_tensor(np.where(spread > 0, spread, 1.0))

    def __call__(self, inputs: torch.Tensor) -> torch.Tensor:
        return (inputs - self.center) / self.scale

    @property
    def y_scale(self) -> torch.Tensor:
        return self.scale[1]


def gaussian_base(hidden: int, init_seed: int = 0) -> Mlp:
    """x -> (mean, raw log precision), zero output layer: N(0, 1) at init"""
    net = Mlp([1, hidden, 2], activation=Activation.TANH, init_seed=init_seed)
    with torch.no_grad():
        net.linear_layers[-1].weight.zero_()
    return net


@dataclass
class ScoreModel:
    """
    One arm's score over raw (x, y) plus the integration grid.

    With a base network the score in standardized units is
    -precision(x) (y - mean(x)) + RESIDUAL_BOUND tanh(score_net(x, y));
    without one it is score_net(x, y) alone.
    """
    arm: int
    score_net: Mlp
    grid: GridSpec
    beta: Optional[BetaModel] = None
    standardizer: Optional[_Standardizer] = None
    base_net: Optional[Mlp] = None
    loss_trace: List[float] = field(default_factory=list)

    def score_tensor(self, inputs: torch.Tensor) -> torch.Tensor:
        z = self.standardizer(inputs) if self.standardizer is not None else inputs
        if self.base_net is None:
            return self.score_net(z).reshape(-1)
        base = self.base_net(z[:, :1])
        log_precision = LOG_PRECISION_BOUND * torch.tanh(base[:, 1] / LOG_PRECISION_BOUND)
        residual = RESIDUAL_BOUND * torch.tanh(self.score_net(z).reshape(-1))
        score = -torch.exp(log_precision) * (z[:, 1] - base[:, 0]) + residual
        if self.standardizer is not None:
            score = score / self.standardizer.y_scale
        return score

    def trainable(self) -> List[torch.nn.Module]:
        return [self.score_net] + ([self.base_net] if self.base_net is not None else [])

    def score(self, x, y) -> np.ndarray:
        inputs = np.column_stack([np.ravel(x), np.ravel(y)])
        with torch.no_grad():
            return self.score_tensor(as_tensor(inputs)).numpy()

    def composite(self, inputs: torch.Tensor) -> torch.Tensor:
        """psi = s(x, y) + d/dy log beta(x, y, arm)"""
        psi = self.score_tensor(inputs)
        if self.beta is not None:
            arm_column = torch.full((inputs.shape[0], 1), float(self.arm), dtype=inputs.dtype)
            psi = psi + d_dy(lambda z: self.beta.log_beta(torch.cat([z, arm_column], dim=1)), inputs)
        return psi


def score_matching_loss(models: Dict[int, ScoreModel], data: Dict[int, torch.Tensor],
                        beta: Optional[BetaModel], lam1: float, lam2: float) -> torch.Tensor:
    """
    Sum over arms of mean(psi^2 / 2 + d psi / dy), plus, when beta is given,
    mean(-lam1 log beta + lam2 beta^2) over all units.
    """
    total = torch.zeros((), dtype=torch.float64)
    log_betas = []
    for arm, inputs in data.items():
        model = models[arm]
        psi = model.composite(inputs)
        dpsi = d_dy(model.composite, inputs)
        total = total + torch.mean(0.5 * psi ** 2 + dpsi)
        if beta is not None:
            arm_column = torch.full((inputs.shape[0], 1), float(arm), dtype=inputs.dtype)
            log_betas.append(beta.log_beta(torch.cat([inputs, arm_column], dim=1)))
    if beta is not None and log_betas:
        log_beta = torch.cat(log_betas)
        total = total + torch.mean(-lam1 * log_beta + lam2 * torch.exp(2.0 * log_beta))
    return total


@dataclass(frozen=True)
class ScoreTrainConfig:
    hidden: Tuple[int, ...] = (64, 64)
    base_hidden: int = 32
    beta_hidden: int = 10
    steps: int = 2000
    lr: float = 0.01
    grid: GridSpec = field(default_factory=GridSpec)


def fit_score_model(observed_b: Dataset, correction: bool, lam1: float = 0.05,
                    lam2: float = 0.05, train_cfg: ScoreTrainConfig = None,
                    seed: int = 0) -> Dict[int, ScoreModel]:
    """
    Train per-arm score networks (and a shared beta network when correcting).

    Raises:
        EstimationError: If an arm is empty or training stays non-finite
    """
    cfg = train_cfg or ScoreTrainConfig()
    cfg.grid.validate()
    beta = BetaModel(cfg.beta_hidden, init_seed=seed + 101) if correction else None
    models: Dict[int, ScoreModel] = {}
    data: Dict[int, torch.Tensor] = {}
    for arm in (0, 1):
        subset = observed_b.arm(arm)
        if len(subset) == 0:
            raise EstimationError(f"score model: no units in arm {arm}")
        net = Mlp([2, *cfg.hidden, 1], activation=Activation.SOFTPLUS, init_seed=seed + arm)
        models[arm] = ScoreModel(arm=arm, score_net=net, grid=cfg.grid, beta=beta,
                                 standardizer=_Standardizer(subset.x, subset.y),
                                 base_net=gaussian_base(cfg.base_hidden, init_seed=seed + 11 + arm))
        data[arm] = as_tensor(np.column_stack([subset.x, subset.y]))

    modules = models[0].trainable() + models[1].trainable() + ([beta.net] if beta else [])
    history = train_adam(modules, lambda: score_matching_loss(models, data, beta, lam1, lam2),
                         steps=cfg.steps, lr=cfg.lr,
                         label="score model" + (" with selection weights" if correction else ""))
    for model in models.values():
        model.loss_trace = history
    return models


def _conditional_means_on(model, x: np.ndarray, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    ys = grid.values()
    means = np.empty(len(x))
    boundary = np.empty(len(x))
    for start in range(0, len(x), CHUNK):
        xs = x[start:start + CHUNK]
        scores = model.score(np.repeat(xs, len(ys)), np.tile(ys, len(xs))).reshape(len(xs), len(ys))
        log_p = np.cumsum(scores, axis=1) * grid.step
        probs = softmax(log_p, axis=1)
        means[start:start + CHUNK] = probs @ ys
        boundary[start:start + CHUNK] = np.maximum(probs[:, 0], probs[:, -1]) / probs.max(axis=1)
    return means, boundary


def score_conditional_mean(model, x, grid: GridSpec = None, return_flags: bool = False):
    """
    E[Y | X = x] from a score model by cumulative Riemann sums of the score.

    `model` needs score(x, y) and a grid. Points whose density is still
    non-negligible at a grid boundary are recomputed once on a widened
    grid; if that does not help they are counted as flagged.
    """
    grid = grid or model.grid
    grid.validate()
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    means, boundary = _conditional_means_on(model, x_arr, grid)

    flagged = 0
    heavy = boundary > BOUNDARY_RATIO
    if np.any(heavy):
        wide = grid.widened()
        wide_means, wide_boundary = _conditional_means_on(model, x_arr[heavy], wide)
        means[heavy] = wide_means
        flagged = int(np.sum(wide_boundary > BOUNDARY_RATIO))
        if flagged:
            logger.warning("score integration grid misses density mass at %d x values", flagged)

    value = float(means[0]) if np.ndim(x) == 0 else means
    if return_flags:
        return value, flagged
    return value
