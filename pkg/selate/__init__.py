"""
selate - average treatment effects under selection bias
"""

__version__ = "0.3.0"
__author__ = "selate developers"

from .errors import ConfigError, EstimationError, SelateError
from .model import AteEstimate, Dataset, Method, RunReport, Sample
from .rng import RngStream, new_rng

__all__ = [
    "ConfigError",
    "EstimationError",
    "SelateError",
    "AteEstimate",
    "Dataset",
    "Method",
    "RunReport",
    "Sample",
    "RngStream",
    "new_rng",
]
