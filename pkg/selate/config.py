"""
Experiment configuration: schema, JSON loading and canonical hashing
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Tuple, Union, get_args, get_origin, get_type_hints

from .datagen import PopulationConfig
from .errors import ConfigError
from .estimators.base import EstimatorSettings
from .model import Method
from .propensity import PropensityConfig
from .selection import SelectionSpec

OUTPUT_DIR_ENV = "SELATE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "selate-out"

DEFAULT_METHODS = (Method.IPW, Method.POLYNOMIAL, Method.MLE, Method.MLE_BETA,
                   Method.SM, Method.SM_BETA)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one benchmark run"""
    population: PopulationConfig = field(default_factory=PopulationConfig)
    selection: SelectionSpec = field(default_factory=SelectionSpec)
    propensity: PropensityConfig = field(default_factory=PropensityConfig)
    estimators: EstimatorSettings = field(default_factory=EstimatorSettings)
    methods: Tuple[str, ...] = DEFAULT_METHODS
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    c: float = 0.05
    n_mc: int = 1_000_000
    record_timing: bool = False

    def validate(self) -> None:
        from .estimators.factory import resolve_methods

        self.population.validate()
        self.selection.validate()
        self.propensity.validate()
        self.estimators.validate()
        resolve_methods(self.methods)
        if not self.methods:
            raise ConfigError("at least one method is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 < self.c < 0.5:
            raise ConfigError(f"overlap threshold c must lie in (0, 1/2), got {self.c}")
        if self.n_mc < 100_000:
            raise ConfigError(f"n_mc must be at least 1e5, got {self.n_mc}")

    def with_selection(self, **changes) -> 'ExperimentConfig':
        return replace(self, selection=replace(self.selection, **changes))


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _convert(hint: Any, value: Any, path: str) -> Any:
    if is_dataclass(hint):
        return _build(hint, value, path)
    if get_origin(hint) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        args = get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], item, path) for item in value)
        if args and len(args) != len(value):
            raise ConfigError(f"{path}: expected {len(args)} entries, got {len(value)}")
        return tuple(_convert(arg, item, path) for arg, item in zip(args, value)) if args else tuple(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if hint is str and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init and not f.name.startswith('_')}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key '{_join(path, unknown[0])}'")
    return cls(**{name: _convert(hints[name], value, _join(path, name)) for name, value in data.items()})


def config_from_dict(data: dict) -> ExperimentConfig:
    """
    Build and validate a config. Missing keys take their defaults.

    Raises:
        ConfigError: On unknown keys (named by dotted path), wrong types or
            out-of-range values
    """
    cfg = _build(ExperimentConfig, data, "")
    cfg.validate()
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    if not text.strip():
        return config_from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data)


def config_to_dict(cfg) -> dict:
    """Plain JSON-ready dict of any config dataclass"""
    return json.loads(json.dumps(asdict(cfg)))


def _canonical(cfg) -> str:
    return json.dumps(asdict(cfg), sort_keys=True, separators=(',', ':'))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(_canonical(cfg).encode('utf-8')).hexdigest()


def population_hash(cfg: PopulationConfig) -> str:
    return hashlib.sha256(_canonical(cfg).encode('utf-8')).hexdigest()


def output_dir(override: Union[str, Path, None] = None) -> Path:
    """--output-dir, else $SELATE_OUTPUT_DIR, else ./selate-out"""
    if override:
        return Path(override)
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))
