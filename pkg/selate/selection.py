"""
Two-stage selection mechanism

Stage 1 truncates one arm deterministically in the covariate tails.
Stage 2 keeps each surviving unit with a logistic probability in the
outcome (optionally shifted by the covariate for the sweep form).
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import ConfigError
from .model import Dataset
from .rng import RngStream

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class SigmoidForm:
    OUTCOME_ONLY = "outcome_only"
    OUTCOME_COVARIATE = "outcome_covariate"

    ALL = (OUTCOME_ONLY, OUTCOME_COVARIATE)


@dataclass(frozen=True)
class SelectionSpec:
    det_enabled: bool = True
    x_thresh: float = 2.0
    det_arm: int = 0
    sig_form: str = SigmoidForm.OUTCOME_ONLY
    alpha: float = 3.0
    gamma: float = 1.5
    beta_c: float = 1.0
    beta_s: float = 0.1

    def validate(self) -> None:
        if self.sig_form not in SigmoidForm.ALL:
            raise ConfigError(f"unknown sigmoid form '{self.sig_form}'. "
                              f"Available: {', '.join(SigmoidForm.ALL)}")
        if self.det_arm not in (0, 1):
            raise ConfigError(f"truncated arm must be 0 or 1, got {self.det_arm}")
        if self.x_thresh < 0:
            raise ConfigError(f"x_thresh must be non-negative, got {self.x_thresh}")


@dataclass
class SelectionReport:
    """Kept counts per stage and the per-unit keep mask over the population"""
    total: int
    passed_deterministic: int
    kept: int
    mask: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def kept_fraction(self) -> float:
        return self.kept / self.total if self.total else 0.0


def deterministic_mask(spec: SelectionSpec, x: ArrayLike, t: ArrayLike) -> ArrayLike:
    """True iff the unit is in the non-truncated arm or |x| <= x_thresh"""
    if not spec.det_enabled:
        return np.ones(np.shape(x), dtype=bool) if np.ndim(x) else True
    keep = (np.asarray(t) != spec.det_arm) | (np.abs(np.asarray(x, dtype=float)) <= spec.x_thresh)
    return bool(keep) if np.ndim(keep) == 0 else keep


def selection_logit(spec: SelectionSpec, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    if spec.sig_form == SigmoidForm.OUTCOME_COVARIATE:
        return (np.asarray(y, dtype=float) + 0.1 * np.asarray(x, dtype=float) - spec.beta_c) * spec.beta_s
    return spec.alpha * (np.asarray(y, dtype=float) - spec.gamma)


def selection_probability(spec: SelectionSpec, x: ArrayLike, y: ArrayLike,
                          t: ArrayLike = None) -> ArrayLike:
    """Probability of keeping a unit that passed the deterministic stage"""
    p = expit(selection_logit(spec, x, y))
    return float(p) if np.ndim(p) == 0 else p


def apply_selection(dataset: Dataset, spec: SelectionSpec,
                    rng: RngStream) -> Tuple[Dataset, SelectionReport]:
    """
    Apply both stages and return the observed subset.

    An empty observed set is returned as is; estimators decide what to do.
    """
    spec.validate()
    n = len(dataset)
    if n == 0:
        return dataset.subset(np.zeros(0, dtype=int)), SelectionReport(0, 0, 0)

    det = deterministic_mask(spec, dataset.x, dataset.t)
    draws = rng.uniform(0.0, 1.0, n)
    keep = det & (draws < selection_probability(spec, dataset.x, dataset.y))

    report = SelectionReport(total=n, passed_deterministic=int(det.sum()),
                             kept=int(keep.sum()), mask=keep)
    logger.debug("selection kept %d/%d (deterministic stage %d)",
                 report.kept, n, report.passed_deterministic)
    return dataset.subset(keep), report
