"""
Exception hierarchy for selate

Every error raised on purpose derives from SelateError so callers (the CLI,
the experiment runner) can tell expected failures from programming errors.
"""

from typing import Optional


class SelateError(Exception):
    """Base class for all selate errors"""


class ConfigError(SelateError, ValueError):
    """Invalid configuration or out-of-range parameter"""


class EstimationError(SelateError, RuntimeError):
    """An estimator could not produce a result"""


class QuadratureError(EstimationError):
    """Numeric integration failed to reach the requested tolerance"""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ShapeError(SelateError, ValueError):
    """Network input does not match the first layer width"""


class UnsupportedOperationError(SelateError, TypeError):
    """Loss is not a differentiable scalar built from supported primitives"""


class DagParseError(SelateError, ValueError):
    """Edge-list text could not be parsed into a DAG"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.reason = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
