"""
Estimator registry and metadata

Central registry of the ATE estimators. Adding a method requires only
registering it here + implementing the estimator class.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Type

from .base import BaseEstimator, EstimatorSettings


@dataclass
class EstimatorMetadata:
    """What a method needs and which selection mechanisms it corrects"""
    name: str                              # Display label used in tables and plots
    estimator_class: Type[BaseEstimator]   # Estimator class to instantiate
    corrects_deterministic: bool           # Handles truncation (x > x_thresh)
    corrects_nondeterministic: bool        # Handles outcome-dependent selection
    needs_population: bool = False         # Reads unselected data
    uses_overlap: bool = True              # Works inside the overlap region
    description: str = ""


# Registry of all estimators
ESTIMATOR_REGISTRY: Dict[str, EstimatorMetadata] = {}


def register_estimator(
    key: str,
    name: str,
    estimator_class: Type[BaseEstimator],
    corrects_deterministic: bool = False,
    corrects_nondeterministic: bool = False,
    needs_population: bool = False,
    uses_overlap: bool = True,
    description: str = ""
) -> None:
    """
    Register an estimator in the registry.

    Args:
        key: Method key used by the CLI and config files (e.g., 'mle_beta')
        name: Display label (e.g., 'MLE+beta')
        estimator_class: Estimator class (e.g., MleBetaEstimator)
        corrects_deterministic: Whether it extrapolates past truncation
        corrects_nondeterministic: Whether it reweights soft selection
        needs_population: Whether it reads the unselected population
        uses_overlap: Whether it is restricted to the overlap region
        description: One-line summary
    """
    ESTIMATOR_REGISTRY[key] = EstimatorMetadata(
        name=name,
        estimator_class=estimator_class,
        corrects_deterministic=corrects_deterministic,
        corrects_nondeterministic=corrects_nondeterministic,
        needs_population=needs_population,
        uses_overlap=uses_overlap,
        description=description
    )


def get_estimator(method: str, settings: EstimatorSettings = None) -> BaseEstimator:
    """
    Get an estimator instance for a method.

    Raises:
        KeyError: If the method is not registered
    """
    if method not in ESTIMATOR_REGISTRY:
        raise KeyError(f"Method '{method}' not registered. "
                       f"Available: {', '.join(ESTIMATOR_REGISTRY.keys())}")
    return ESTIMATOR_REGISTRY[method].estimator_class(settings)


def list_methods() -> List[str]:
    """Get list of all registered method keys"""
    return list(ESTIMATOR_REGISTRY.keys())


def get_method_info(method: str) -> Optional[EstimatorMetadata]:
    return ESTIMATOR_REGISTRY.get(method)


def display_name(method: str) -> str:
    info = get_method_info(method)
    return info.name if info else method
