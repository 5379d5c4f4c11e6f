"""
Population generator

Structural model: X ~ U(x_low, x_high), T ~ Bernoulli(e*(X)) with a linear
propensity, Y(t) = mu_t(X) + eps (additive) or (1 + eps) * mu_t(X)
(multiplicative). Four noise families and four mean-function forms.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError
from .model import Dataset
from .rng import RngStream, new_rng

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

PARETO_SHAPE = 3.0
LOG_FORM_X_FLOOR = 0.05


class NoiseFamily:
    """Noise distributions (all mean zero)"""
    NORMAL = "normal"
    LAPLACE = "laplace"
    LOGNORMAL = "lognormal_centered"
    PARETO = "pareto_centered"

    ALL = (NORMAL, LAPLACE, LOGNORMAL, PARETO)


class NoiseMode:
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"

    ALL = (ADDITIVE, MULTIPLICATIVE)


class OutcomeForm:
    """Mean-function forms"""
    POLY_DEFAULT = "poly_default"
    SIN = "sin"
    LOG = "log"
    SEMI_SYNTHETIC_LINEAR = "semi_synthetic_linear"

    ALL = (POLY_DEFAULT, SIN, LOG, SEMI_SYNTHETIC_LINEAR)


DEFAULT_COEFFICIENTS = (
    (1.0, 0.5, 0.0, -0.2),   # mu_0, ascending powers of x
    (3.0, -0.5, 0.0, 0.3),   # mu_1
)


@dataclass(frozen=True)
class NoiseSpec:
    family: str = NoiseFamily.NORMAL
    scale: float = 0.5
    mode: str = NoiseMode.ADDITIVE

    def validate(self) -> None:
        if self.family not in NoiseFamily.ALL:
            raise ConfigError(f"unknown noise family '{self.family}'. "
                              f"Available: {', '.join(NoiseFamily.ALL)}")
        if self.mode not in NoiseMode.ALL:
            raise ConfigError(f"unknown noise mode '{self.mode}'")
        if not self.scale >= 0:
            raise ConfigError(f"noise scale must be non-negative, got {self.scale}")


@dataclass(frozen=True)
class OutcomeSpec:
    form: str = OutcomeForm.POLY_DEFAULT
    coefficients: Tuple[Tuple[float, ...], Tuple[float, ...]] = DEFAULT_COEFFICIENTS
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def validate(self) -> None:
        if self.form not in OutcomeForm.ALL:
            raise ConfigError(f"unknown outcome form '{self.form}'. "
                              f"Available: {', '.join(OutcomeForm.ALL)}")
        if len(self.coefficients) != 2:
            raise ConfigError("outcome coefficients need one list per arm")
        self.noise.validate()


@dataclass(frozen=True)
class PopulationConfig:
    n: int = 5000
    x_low: float = -3.0
    x_high: float = 3.0
    propensity_slope: float = 0.1
    propensity_intercept: float = 0.5
    outcome: OutcomeSpec = field(default_factory=OutcomeSpec)
    seed: int = 0

    def validate(self) -> None:
        if self.n < 0:
            raise ConfigError(f"population size must be non-negative, got {self.n}")
        if not self.x_low < self.x_high:
            raise ConfigError(f"empty covariate range [{self.x_low}, {self.x_high}]")
        for x in (self.x_low, self.x_high):
            e = self.propensity_intercept + self.propensity_slope * x
            if not 0.0 < e < 1.0:
                raise ConfigError(f"true propensity {e:.4g} at x={x} leaves (0, 1)")
        self.outcome.validate()

    def with_seed(self, seed: int) -> 'PopulationConfig':
        return replace(self, seed=seed)


def covariate_range(cfg: PopulationConfig) -> Tuple[float, float]:
    """Range X is drawn from; the Log form is restricted to positive x"""
    if cfg.outcome.form == OutcomeForm.LOG:
        low = max(cfg.x_low, LOG_FORM_X_FLOOR)
        if low >= cfg.x_high:
            raise ConfigError("Log outcome form needs x_high > "
                              f"{LOG_FORM_X_FLOOR} (log(2x) requires x > 0)")
        return low, cfg.x_high
    return cfg.x_low, cfg.x_high


def true_propensity(cfg: PopulationConfig, x: ArrayLike) -> ArrayLike:
    """
    Linear propensity e*(x) = intercept + slope * x.

    Raises:
        ConfigError: If x is outside the covariate range or e* leaves (0, 1)
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < cfg.x_low) or np.any(x_arr > cfg.x_high):
        raise ConfigError(f"x outside covariate range [{cfg.x_low}, {cfg.x_high}]")
    e = cfg.propensity_intercept + cfg.propensity_slope * x_arr
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ConfigError("true propensity leaves (0, 1)")
    return float(e) if np.ndim(x) == 0 else e


def _polyval(coefficients: Sequence[float], x: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(x, np.asarray(coefficients, dtype=float))


def mean_function(spec: OutcomeSpec, t: int, x: ArrayLike) -> ArrayLike:
    """
    Conditional mean mu_t(x) for the configured form.

    Raises:
        ConfigError: For the Log form at x where a log argument is not positive
    """
    if t not in (0, 1):
        raise ConfigError(f"treatment must be 0 or 1, got {t}")
    x_arr = np.asarray(x, dtype=float)
    form = spec.form
    if form == OutcomeForm.POLY_DEFAULT:
        mu = _polyval(spec.coefficients[t], x_arr)
    elif form == OutcomeForm.SIN:
        mu = 2.0 * x_arr * np.sin(2.0 * x_arr)
        if t == 1:
            mu = mu + x_arr ** 2 + 0.1 * x_arr ** 4
    elif form == OutcomeForm.LOG:
        if np.any(x_arr <= 0.0):
            raise ConfigError("Log outcome form is undefined for x <= 0")
        mu = x_arr * np.log(x_arr + 4.0)
        if t == 1:
            mu = mu + x_arr ** 2 * np.log(2.0 * x_arr) + 0.1 * x_arr ** 4
    elif form == OutcomeForm.SEMI_SYNTHETIC_LINEAR:
        mu = 0.1 * x_arr + t * x_arr
    else:
        raise ConfigError(f"unknown outcome form '{form}'")
    return float(mu) if np.ndim(x) == 0 else mu


def draw_noise(spec: NoiseSpec, rng: RngStream, size: int) -> np.ndarray:
    """Mean-zero noise draws of the configured family and scale"""
    if spec.scale == 0.0:
        return np.zeros(size)
    if spec.family == NoiseFamily.NORMAL:
        return rng.normal(0.0, spec.scale, size)
    if spec.family == NoiseFamily.LAPLACE:
        return rng.laplace(0.0, spec.scale, size)
    if spec.family == NoiseFamily.LOGNORMAL:
        # E[exp(sigma Z)] = exp(sigma^2 / 2)
        return rng.lognormal(0.0, spec.scale, size) - np.exp(spec.scale ** 2 / 2.0)
    if spec.family == NoiseFamily.PARETO:
        # Pareto(x_m, a) has mean a x_m / (a - 1)
        draws = rng.pareto(spec.scale, PARETO_SHAPE, size)
        return draws - PARETO_SHAPE * spec.scale / (PARETO_SHAPE - 1.0)
    raise ConfigError(f"unknown noise family '{spec.family}'")


def _outcome(spec: OutcomeSpec, mu: np.ndarray, eps: np.ndarray) -> np.ndarray:
    if spec.noise.mode == NoiseMode.MULTIPLICATIVE:
        return (1.0 + eps) * mu
    return mu + eps


def generate_population(cfg: PopulationConfig) -> Dataset:
    """Draw n units from the structural model"""
    cfg.validate()
    from .config import population_hash

    low, high = covariate_range(cfg)
    meta = {"config_hash": population_hash(cfg), "x_range": [low, high],
            "outcome_form": cfg.outcome.form}
    if cfg.n == 0:
        return Dataset.empty(seed=cfg.seed, meta=meta)

    root = new_rng(cfg.seed)
    x = root.spawn("covariate").uniform(low, high, cfg.n)
    t = root.spawn("treatment").bernoulli(true_propensity(cfg, x))
    noise = root.spawn("noise")
    eps0 = draw_noise(cfg.outcome.noise, noise, cfg.n)
    eps1 = draw_noise(cfg.outcome.noise, noise, cfg.n)
    y0 = _outcome(cfg.outcome, mean_function(cfg.outcome, 0, x), eps0)
    y1 = _outcome(cfg.outcome, mean_function(cfg.outcome, 1, x), eps1)
    y = np.where(t == 1, y1, y0)

    logger.debug("generated population n=%d seed=%d treated=%.3f",
                 cfg.n, cfg.seed, float(t.mean()))
    return Dataset(x=x, t=t, y0=y0, y1=y1, y=y, selected=np.ones(cfg.n, dtype=bool),
                   seed=cfg.seed, meta=meta)


def oracle_ate(cfg: PopulationConfig, n_mc: int = 1_000_000) -> float:
    """
    Monte Carlo E[mu_1(X) - mu_0(X)] over the covariate distribution.

    Both noise modes have mean-zero noise, so the noise drops out.

    Raises:
        ConfigError: If n_mc < 10^5
    """
    if n_mc < 100_000:
        raise ConfigError(f"oracle needs at least 1e5 Monte Carlo draws, got {n_mc}")
    cfg.validate()
    low, high = covariate_range(cfg)
    x = new_rng(cfg.seed).spawn("oracle").uniform(low, high, n_mc)
    diff = mean_function(cfg.outcome, 1, x) - mean_function(cfg.outcome, 0, x)
    return float(np.mean(diff))
