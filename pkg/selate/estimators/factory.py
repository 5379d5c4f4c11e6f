"""
Estimator factory
"""

from typing import List, Sequence

from ..errors import ConfigError
from .base import BaseEstimator, EstimatorSettings
from .registry import ESTIMATOR_REGISTRY, get_estimator
# Import to trigger registration
from . import builtin  # noqa: F401


def create_estimator(method: str, settings: EstimatorSettings = None) -> BaseEstimator:
    """
    Create an estimator instance.

    Raises:
        ConfigError: If the method key is unknown
    """
    try:
        return get_estimator(method, settings)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc


def resolve_methods(methods: Sequence[str]) -> List[str]:
    """Validate method keys, keeping order and dropping duplicates"""
    unknown = [m for m in methods if m not in ESTIMATOR_REGISTRY]
    if unknown:
        raise ConfigError(f"unknown method(s): {', '.join(unknown)}. "
                          f"Available: {', '.join(ESTIMATOR_REGISTRY.keys())}")
    return list(dict.fromkeys(methods))
