"""
Per-arm polynomial regression on [1, x, x^2, x^3]
"""

import numpy as np
from scipy.linalg import qr, solve_triangular

from ..errors import EstimationError
from ..model import AteEstimate, Dataset, Method
from .assembly import FittedModels, estimate_ate
from .base import BaseEstimator, EstimationContext

RANK_TOL = 1e-10


def polynomial_design(x: np.ndarray, degree: int) -> np.ndarray:
    return np.vander(np.asarray(x, dtype=float), degree + 1, increasing=True)


def fit_polynomial(x: np.ndarray, y: np.ndarray, degree: int = 3) -> np.ndarray:
    """
    Least squares coefficients (ascending powers) via pivoted QR.

    Raises:
        EstimationError: If the design is rank deficient
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(x)) < degree + 1:
        raise EstimationError(f"degree {degree} fit needs {degree + 1} distinct x values, "
                              f"got {len(np.unique(x))}")
    design = polynomial_design(x, degree)
    q, r, pivot = qr(design, mode='economic', pivoting=True)
    diagonal = np.abs(np.diag(r))
    if diagonal[-1] <= RANK_TOL * diagonal[0]:
        raise EstimationError("polynomial design is rank deficient")
    solution = solve_triangular(r, q.T @ y)
    coefficients = np.empty(degree + 1)
    coefficients[pivot] = solution
    return coefficients


def polynomial_fit(observed_arm: Dataset, degree: int = 3) -> np.ndarray:
    return fit_polynomial(observed_arm.x, observed_arm.y, degree)


def polynomial_mu(coeffs: np.ndarray, x):
    value = np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)
    return float(value) if np.ndim(x) == 0 else value


class PolynomialEstimator(BaseEstimator):
    """Extrapolating outcome regression; handles truncation, not soft selection"""

    method = Method.POLYNOMIAL

    def fit(self, context: EstimationContext) -> 'PolynomialEstimator':
        working = context.observed_b
        self.coefficients = {arm: polynomial_fit(working.arm(arm), self.settings.poly_degree)
                             for arm in (0, 1)}
        self.fitted = True
        return self

    def fitted_models(self) -> FittedModels:
        self._require_fitted()
        return FittedModels(mu={arm: (lambda x, c=c: polynomial_mu(c, x))
                                for arm, c in self.coefficients.items()})

    def estimate(self, context: EstimationContext) -> AteEstimate:
        return estimate_ate(self.method, context.observed, context.prop_model,
                            context.regions, self.fitted_models())
