"""
Data models for datasets, estimates and experiment reports
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Union

import numpy as np
import pandas as pd


class Method:
    """Stable method keys (CLI vocabulary)"""
    IPW = "ipw"
    POLYNOMIAL = "poly"
    MLE = "mle"
    MLE_BETA = "mle_beta"
    SM = "sm"
    SM_BETA = "sm_beta"
    HECKMAN = "heckman"
    AIPW = "aipw"
    AIPW_ORACLE = "aipw_oracle"

    ALL = (IPW, POLYNOMIAL, MLE, MLE_BETA, SM, SM_BETA, HECKMAN, AIPW, AIPW_ORACLE)


@dataclass(frozen=True)
class Sample:
    """One unit: covariate, treatment, potential and factual outcomes"""
    x: float
    t: int
    y0: float
    y1: float
    y: float
    selected: bool = True

    def __post_init__(self):
        if self.t not in (0, 1):
            raise ValueError(f"treatment must be 0 or 1, got {self.t}")
        expected = self.y1 if self.t == 1 else self.y0
        if not (self.y == expected or (math.isnan(self.y) and math.isnan(expected))):
            raise ValueError("factual outcome must equal the potential outcome of the received arm")


DATASET_COLUMNS = ("x", "t", "y0", "y1", "y", "selected")


def _frozen(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable column store of samples.

    Columns are read-only numpy arrays; subset() returns a new Dataset and
    never touches the parent.
    """
    x: np.ndarray
    t: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    y: np.ndarray
    selected: np.ndarray
    seed: int = 0
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.x)
        for name in DATASET_COLUMNS:
            if len(getattr(self, name)) != n:
                raise ValueError(f"column '{name}' has length {len(getattr(self, name))}, expected {n}")
        object.__setattr__(self, "x", _frozen(self.x, float))
        object.__setattr__(self, "t", _frozen(self.t, np.int64))
        object.__setattr__(self, "y0", _frozen(self.y0, float))
        object.__setattr__(self, "y1", _frozen(self.y1, float))
        object.__setattr__(self, "y", _frozen(self.y, float))
        object.__setattr__(self, "selected", _frozen(self.selected, bool))
        if n and not np.isin(self.t, (0, 1)).all():
            raise ValueError("treatment column must contain only 0 and 1")

    @classmethod
    def empty(cls, seed: int = 0, meta: Optional[dict] = None) -> 'Dataset':
        return cls(x=[], t=[], y0=[], y1=[], y=[], selected=[], seed=seed, meta=dict(meta or {}))

    @classmethod
    def from_samples(cls, samples: List[Sample], seed: int = 0,
                     meta: Optional[dict] = None) -> 'Dataset':
        return cls(
            x=[s.x for s in samples],
            t=[s.t for s in samples],
            y0=[s.y0 for s in samples],
            y1=[s.y1 for s in samples],
            y=[s.y for s in samples],
            selected=[s.selected for s in samples],
            seed=seed,
            meta=dict(meta or {}),
        )

    def __len__(self) -> int:
        return len(self.x)

    @property
    def samples(self) -> List[Sample]:
        return list(self.iter_samples())

    def iter_samples(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield Sample(float(self.x[i]), int(self.t[i]), float(self.y0[i]),
                         float(self.y1[i]), float(self.y[i]), bool(self.selected[i]))

    def subset(self, index: Union[np.ndarray, List[int]], **meta_updates) -> 'Dataset':
        """Filtered view as a new Dataset (boolean mask or integer indices)"""
        index = np.asarray(index)
        meta = dict(self.meta)
        meta.update(meta_updates)
        return Dataset(x=self.x[index], t=self.t[index], y0=self.y0[index],
                       y1=self.y1[index], y=self.y[index], selected=self.selected[index],
                       seed=self.seed, meta=meta)

    def arm(self, t: int) -> 'Dataset':
        return self.subset(self.t == t)

    @property
    def points(self) -> np.ndarray:
        """(n, 2) array of (x, y) pairs"""
        return np.column_stack([self.x, self.y])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: np.asarray(getattr(self, name)) for name in DATASET_COLUMNS})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, seed: int = 0,
                   meta: Optional[dict] = None) -> 'Dataset':
        missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"dataset frame is missing columns: {', '.join(missing)}")
        return cls(
            x=frame["x"].to_numpy(float),
            t=frame["t"].to_numpy(np.int64),
            y0=frame["y0"].to_numpy(float),
            y1=frame["y1"].to_numpy(float),
            y=frame["y"].to_numpy(float),
            selected=frame["selected"].astype(bool).to_numpy(),
            seed=seed,
            meta=dict(meta or {}),
        )

    def save_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def load_csv(cls, path: Union[str, Path], seed: int = 0) -> 'Dataset':
        return cls.from_frame(pd.read_csv(path), seed=seed, meta={"source": str(path)})


@dataclass
class AteEstimate:
    """Result of one estimator on one dataset"""
    method: str
    value: float
    n_used: int
    diagnostics: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)


@dataclass
class RunRow:
    """One (seed, method) result"""
    seed: int
    method: str
    estimate: float
    error: float
    runtime_sec: float = 0.0
    message: str = ""

    @property
    def failed(self) -> bool:
        return math.isnan(self.estimate)


@dataclass
class RunReport:
    """All rows of an experiment plus the oracle it is scored against"""
    rows: List[RunRow] = field(default_factory=list)
    oracle_ate: float = float("nan")
    config_hash: str = ""
    selection_counts: Dict[int, Dict[str, int]] = field(default_factory=dict)

    @property
    def methods(self) -> List[str]:
        seen: List[str] = []
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        return seen

    def errors_for(self, method: str) -> np.ndarray:
        return np.array([row.error for row in self.rows if row.method == method], dtype=float)


@dataclass
class SummaryRow:
    """Per-method mean and sample standard deviation of the error"""
    method: str
    mean_error: float
    std_error: float
    n: int
    n_failed: int = 0
    single_seed: bool = False
