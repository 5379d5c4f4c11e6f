"""
ATE estimators
"""

from .base import BaseEstimator, EstimationContext, EstimatorSettings, HeckmanMode
from .assembly import FittedModels, estimate_ate
from .factory import create_estimator, resolve_methods
from .registry import get_method_info, list_methods

__all__ = [
    "BaseEstimator",
    "EstimationContext",
    "EstimatorSettings",
    "HeckmanMode",
    "FittedModels",
    "estimate_ate",
    "create_estimator",
    "resolve_methods",
    "get_method_info",
    "list_methods",
]
