"""
Register all built-in estimators

To add a method:

1. Implement YourEstimator(BaseEstimator) in estimators/your_method.py
2. Import it here
3. Call register_estimator() with metadata
"""

from ..model import Method
from .aipw import AipwEstimator, AipwOracleEstimator
from .heckman import HeckmanEstimator
from .ipw import IpwEstimator
from .mle import MleBetaEstimator, MleEstimator
from .poly import PolynomialEstimator
from .registry import register_estimator
from .score import ScoreBetaEstimator, ScoreEstimator


def register_all_estimators():
    """Register all built-in estimators"""

    register_estimator(
        key=Method.IPW,
        name='IPW',
        estimator_class=IpwEstimator,
        description='Inverse propensity weighting on the selected data'
    )

    register_estimator(
        key=Method.POLYNOMIAL,
        name='Polynomial',
        estimator_class=PolynomialEstimator,
        corrects_deterministic=True,
        description='Per-arm cubic regression extrapolated over B'
    )

    register_estimator(
        key=Method.MLE,
        name='MLE',
        estimator_class=MleEstimator,
        corrects_deterministic=True,
        description='Per-arm weighted-EM Gaussian mixture, conditional mean'
    )

    register_estimator(
        key=Method.MLE_BETA,
        name='MLE+beta',
        estimator_class=MleBetaEstimator,
        corrects_deterministic=True,
        corrects_nondeterministic=True,
        description='Mixture fit alternated with a learned selection weight'
    )

    register_estimator(
        key=Method.SM,
        name='SM',
        estimator_class=ScoreEstimator,
        corrects_deterministic=True,
        description='Per-arm score matching, integrated conditional mean'
    )

    register_estimator(
        key=Method.SM_BETA,
        name='SM+beta',
        estimator_class=ScoreBetaEstimator,
        corrects_deterministic=True,
        corrects_nondeterministic=True,
        description='Score matching of the selection-weighted density'
    )

    register_estimator(
        key=Method.HECKMAN,
        name='Heckman',
        estimator_class=HeckmanEstimator,
        uses_overlap=False,
        description='Two-step probit + inverse Mills ratio correction'
    )

    register_estimator(
        key=Method.AIPW,
        name='AIPW',
        estimator_class=AipwEstimator,
        uses_overlap=False,
        description='Doubly robust estimator on the selected data'
    )

    register_estimator(
        key=Method.AIPW_ORACLE,
        name='AIPW (oracle)',
        estimator_class=AipwOracleEstimator,
        needs_population=True,
        uses_overlap=False,
        description='Doubly robust estimator on the unselected population'
    )


# Auto-register on import
register_all_estimators()
