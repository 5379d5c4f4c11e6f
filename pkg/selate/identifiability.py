"""
Identifiability checks for the ATE under selection

Three executable pieces:

- density ratios between two outcome families and a search for a y where the
  ratio escapes the interval that overlap and a selection floor allow
- equality of polynomial exponents up to an x-only offset, the situation in
  which deterministic selection cannot separate two models
- a checker that takes two parametric tuples (P, Q) on a finite x-grid and
  reports their ATE gap together with a point where the observed (selected)
  distributions differ

All densities are compared in log space.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats
from scipy.special import expit

from .errors import ConfigError, QuadratureError

logger = logging.getLogger(__name__)

QUAD_ABS_TOL = 1e-8
SUPPORT_MASS = 1.0 - 1e-10
RELATIVE_TOL = 1e-6
ATE_TOL = 1e-6
POLY_TOL = 1e-9
GEOMETRIC_MAX_POWER = 20


class FamilyKind:
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    PARETO = "pareto"
    LOGNORMAL = "lognormal"
    POLY_EXPONENT = "poly_exponent"

    ALL = (GAUSSIAN, LAPLACE, PARETO, LOGNORMAL)


class Verdict:
    CONSISTENT_EQUAL_ATE = "consistent_equal_ate"
    CONSISTENT_DETECTABLE = "consistent_detectable"
    VIOLATED = "violated"


VERDICT_MESSAGES = {
    Verdict.CONSISTENT_EQUAL_ATE:
        "consistent with the identifiability condition for this pair: the ATEs agree, "
        "so the implication holds vacuously",
    Verdict.CONSISTENT_DETECTABLE:
        "consistent with the identifiability condition for this pair: the ATEs differ "
        "and the selected distributions differ at the reported witness",
    Verdict.VIOLATED:
        "violated for this pair: the ATEs differ but the selected distributions agree "
        "on every checked point",
}


def _quad(fn, low: float, high: float, what: str) -> float:
    result = integrate.quad(fn, low, high, epsabs=QUAD_ABS_TOL, limit=200, full_output=1)
    if len(result) > 3:
        value, abserr, info, message = result[:4]
        raise QuadratureError(f"quadrature for {what} did not converge: {message}",
                              diagnostics={"value": value, "abserr": abserr,
                                           "neval": info.get("neval"),
                                           "interval": (low, high)})
    return float(result[0])


# Outcome families

@dataclass(frozen=True)
class OutcomeFamily:
    """
    One-dimensional outcome distribution.

    params by kind:
        gaussian:  (mu, sigma)
        laplace:   (mu, b)
        pareto:    (y_m, alpha)
        lognormal: (mu, sigma)
    """
    kind: str
    params: Tuple[float, float]

    def __post_init__(self):
        if self.kind not in FamilyKind.ALL:
            raise ConfigError(f"unknown outcome family '{self.kind}'. "
                              f"Available: {', '.join(FamilyKind.ALL)}")
        if len(self.params) != 2:
            raise ConfigError(f"{self.kind} takes two parameters, got {len(self.params)}")
        first, second = self.params
        if second <= 0 or (self.kind == FamilyKind.PARETO and first <= 0):
            raise ConfigError(f"{self.kind} parameters must be positive where required: {self.params}")

    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> 'OutcomeFamily':
        return cls(FamilyKind.GAUSSIAN, (float(mu), float(sigma)))

    @classmethod
    def laplace(cls, mu: float, b: float) -> 'OutcomeFamily':
        return cls(FamilyKind.LAPLACE, (float(mu), float(b)))

    @classmethod
    def pareto(cls, y_m: float, alpha: float) -> 'OutcomeFamily':
        return cls(FamilyKind.PARETO, (float(y_m), float(alpha)))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> 'OutcomeFamily':
        return cls(FamilyKind.LOGNORMAL, (float(mu), float(sigma)))

    @property
    def distribution(self):
        first, second = self.params
        if self.kind == FamilyKind.GAUSSIAN:
            return stats.norm(loc=first, scale=second)
        if self.kind == FamilyKind.LAPLACE:
            return stats.laplace(loc=first, scale=second)
        if self.kind == FamilyKind.PARETO:
            return stats.pareto(b=second, scale=first)
        return stats.lognorm(s=second, scale=math.exp(first))

    def logpdf(self, y):
        return self.distribution.logpdf(y)

    def pdf(self, y):
        return self.distribution.pdf(y)

    def mean(self) -> float:
        if self.kind == FamilyKind.PARETO and self.params[1] <= 1:
            raise ConfigError(f"pareto outcome with alpha={self.params[1]} has no finite mean")
        return float(self.distribution.mean())

    def support(self) -> Tuple[float, float]:
        """Interval holding all but 1e-10 of the mass"""
        tail = (1.0 - SUPPORT_MASS) / 2.0
        dist = self.distribution
        low = float(dist.ppf(tail))
        if self.kind in (FamilyKind.PARETO, FamilyKind.LOGNORMAL):
            low = float(dist.support()[0])
        return low, float(dist.isf(tail))

    def in_support(self, y: float) -> bool:
        if self.kind == FamilyKind.PARETO:
            return y >= self.params[0]
        if self.kind == FamilyKind.LOGNORMAL:
            return y > 0
        return True


def log_density_ratio(p: OutcomeFamily, q: OutcomeFamily, y: float) -> float:
    """
    log p(y) - log q(y) from the closed forms.

    Raises:
        ConfigError: If the families differ in kind or y is outside a support
    """
    if p.kind != q.kind:
        raise ConfigError(f"density ratio needs one family kind, got {p.kind} and {q.kind}")
    if not (p.in_support(y) and q.in_support(y)):
        raise ConfigError(f"y={y} is outside the support of the {p.kind} densities")
    (p1, p2), (q1, q2) = p.params, q.params
    if p.kind == FamilyKind.GAUSSIAN:
        return math.log(q2 / p2) - (y - p1) ** 2 / (2 * p2 ** 2) + (y - q1) ** 2 / (2 * q2 ** 2)
    if p.kind == FamilyKind.LAPLACE:
        return math.log(q2 / p2) - abs(y - p1) / p2 + abs(y - q1) / q2
    if p.kind == FamilyKind.PARETO:
        # C * y^(alpha_Q - alpha_P)
        constant = math.log(p2 / q2) + p2 * math.log(p1) - q2 * math.log(q1)
        return constant + (q2 - p2) * math.log(y)
    log_y = math.log(y)
    return (math.log(q2 / p2) - (log_y - p1) ** 2 / (2 * p2 ** 2)
            + (log_y - q1) ** 2 / (2 * q2 ** 2))


def density_ratio(p: OutcomeFamily, q: OutcomeFamily, y: float) -> float:
    return math.exp(log_density_ratio(p, q, y))


@dataclass(frozen=True)
class RatioBound:
    """
    Interval the conditional density ratio is confined to when overlap holds
    with constant c and selection has floor d. r = P(S=1)/Q(S=1) and
    h = Q_X(x)/P_X(x) at the queried x.
    """
    c: float
    d: float
    r: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.c < 0.5:
            raise ConfigError(f"overlap constant must lie in (0, 1/2), got {self.c}")
        if not 0.0 < self.d <= 1.0:
            raise ConfigError(f"selection floor must lie in (0, 1], got {self.d}")
        if self.r <= 0 or self.h <= 0:
            raise ConfigError("r and h must be positive")

    @property
    def lower(self) -> float:
        return self.h * self.r * self.c * self.d / (1.0 - self.c)

    @property
    def upper(self) -> float:
        return self.h * self.r * (1.0 - self.c) / (self.c * self.d)

    @property
    def log_lower(self) -> float:
        return math.log(self.h) + math.log(self.r) + math.log(self.c) + math.log(self.d) - math.log1p(-self.c)

    @property
    def log_upper(self) -> float:
        return math.log(self.h) + math.log(self.r) + math.log1p(-self.c) - math.log(self.c) - math.log(self.d)


def geometric_candidates(max_power: int = GEOMETRIC_MAX_POWER) -> np.ndarray:
    """±2^k and ±2^-k for k = 0..max_power"""
    powers = np.exp2(np.arange(-max_power, max_power + 1, dtype=float))
    return np.concatenate([powers, -powers])


def find_witness(p: OutcomeFamily, q: OutcomeFamily, bound: RatioBound,
                 y_range: Tuple[float, float] = (-30.0, 30.0), steps: int = 601,
                 extend: bool = True) -> Optional[float]:
    """
    Smallest |y| whose density ratio p(y)/q(y) leaves [bound.lower, bound.upper].

    The linear grid over y_range is joined with geometric points ±2^k, ±2^-k
    (k <= 20) when extend is set, so ratios escaping only towards 0 or
    infinity are still found. Returns None if every candidate stays inside.
    """
    candidates = np.linspace(y_range[0], y_range[1], steps)
    if extend:
        candidates = np.concatenate([candidates, geometric_candidates()])
    candidates = np.unique(candidates)
    order = np.lexsort((candidates, np.abs(candidates)))
    low, high = bound.log_lower, bound.log_upper
    for y in candidates[order]:
        y = float(y)
        if not (p.in_support(y) and q.in_support(y)):
            continue
        value = log_density_ratio(p, q, y)
        if value < low or value > high:
            logger.debug("witness at y=%g: log ratio %.4g outside [%.4g, %.4g]", y, value, low, high)
            return y
    return None


# Polynomial exponents

@dataclass(frozen=True)
class PolyExponent:
    """
    f(x, y) = sum of a_ij x^i y^j, with terms {(i, j): a_ij}, plus an
    optional marginal exponent g(x) given as ascending coefficients.
    """
    terms: Dict[Tuple[int, int], float]
    marginal: Tuple[float, ...] = ()

    @property
    def degree(self) -> int:
        return max((i + j for (i, j), a in self.terms.items() if a != 0), default=0)

    @property
    def y_degree(self) -> int:
        return max((j for (_, j), a in self.terms.items() if a != 0), default=0)

    def value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(x, y).shape)
        for (i, j), a in self.terms.items():
            total = total + a * x ** i * y ** j
        return total

    def marginal_value(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.marginal or (0.0,))

    def y_coefficients(self, x: float) -> np.ndarray:
        """Ascending coefficients of f(x, .) as a polynomial in y"""
        coefficients = np.zeros(self.y_degree + 1)
        for (i, j), a in self.terms.items():
            if a != 0:
                coefficients[j] += a * x ** i
        return coefficients

    def shifted(self, offset: float = 0.0, y_slope: float = 0.0) -> 'PolyExponent':
        terms = dict(self.terms)
        terms[(0, 0)] = terms.get((0, 0), 0.0) + offset
        terms[(0, 1)] = terms.get((0, 1), 0.0) + y_slope
        return PolyExponent(terms, self.marginal)

    def log_normalizer(self, x: float) -> float:
        """log of the integral of exp(f(x, y)) over y"""
        coefficients = np.trim_zeros(self.y_coefficients(x), 'b')
        top = len(coefficients) - 1
        if top < 2 or top % 2 or coefficients[-1] >= 0:
            raise ConfigError(f"exp(f(x, y)) is not normalizable in y at x={x}")
        y_scan = np.linspace(-50.0, 50.0, 2001)
        peak = float(np.max(self.value(x, y_scan)))
        mass = _quad(lambda y: math.exp(float(self.value(x, y)) - peak),
                     -np.inf, np.inf, f"normalizer at x={x}")
        if not np.isfinite(mass) or mass <= 0:
            raise ConfigError(f"exp(f(x, y)) is not normalizable in y at x={x}")
        return peak + math.log(mass)

    def normalizable(self, x_grid: Sequence[float]) -> bool:
        try:
            for x in x_grid:
                self.log_normalizer(float(x))
        except (ConfigError, QuadratureError):
            return False
        return True


@dataclass(frozen=True)
class PolyExponentConditional:
    """Density in y proportional to exp(f(x, y)) at a fixed x"""
    exponent: PolyExponent
    x: float
    kind: str = field(default=FamilyKind.POLY_EXPONENT, init=False)

    @cached_property
    def log_z(self) -> float:
        return self.exponent.log_normalizer(self.x)

    def logpdf(self, y):
        return self.exponent.value(self.x, y) - self.log_z

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def mean(self) -> float:
        log_z = self.log_z
        return _quad(lambda y: y * math.exp(float(self.exponent.value(self.x, y)) - log_z),
                     -np.inf, np.inf, f"poly-exponent mean at x={self.x}")

    def support(self) -> Tuple[float, float]:
        return -np.inf, np.inf

    def in_support(self, y: float) -> bool:
        return True


class PolyVerdictKind:
    CONSTANT_DIFFERENCE = "constant_difference"
    DISTINCT = "distinct"


@dataclass
class PolyVerdict:
    kind: str
    offsets: Dict[float, float] = field(default_factory=dict)
    max_y_coefficient: float = 0.0

    @property
    def constant_difference(self) -> bool:
        return self.kind == PolyVerdictKind.CONSTANT_DIFFERENCE


def poly_exponent_equal_on_region(f_p: PolyExponent, f_q: PolyExponent,
                                  region: Sequence[Tuple[float, float]]) -> PolyVerdict:
    """
    Decide whether f_Q - f_P depends on x only over the sampled region.

    For each x the difference is fitted as a polynomial in y; the verdict is a
    constant difference (with offsets c_x = f_Q - f_P) when every y-dependent
    coefficient vanishes within 1e-9 relative to the difference's scale.

    Raises:
        ConfigError: If some x has fewer than degree + 2 distinct y values
    """
    degree = max(f_p.degree, f_q.degree)
    by_x: Dict[float, List[float]] = {}
    for x, y in region:
        by_x.setdefault(float(x), []).append(float(y))

    offsets = {}
    largest = 0.0
    for x, ys in sorted(by_x.items()):
        ys = np.unique(ys)
        if len(ys) < degree + 2:
            raise ConfigError(f"x={x} has {len(ys)} distinct y values, need at least {degree + 2}")
        diff = f_q.value(x, ys) - f_p.value(x, ys)
        fit = np.polynomial.Polynomial.fit(ys, diff, degree)
        scale = max(1.0, float(np.max(np.abs(diff))))
        y_part = float(np.max(np.abs(fit.coef[1:]))) / scale if degree > 0 else 0.0
        largest = max(largest, y_part)
        offsets[x] = float(np.mean(diff))

    if largest > POLY_TOL:
        return PolyVerdict(PolyVerdictKind.DISTINCT, max_y_coefficient=largest)
    return PolyVerdict(PolyVerdictKind.CONSTANT_DIFFERENCE, offsets=offsets,
                       max_y_coefficient=largest)


# Propensity and selection mechanisms

@dataclass(frozen=True)
class ConstantPropensity:
    p: float
    c: float = 0.05

    def prob(self, t: int, x: float) -> float:
        return self.p if t == 1 else 1.0 - self.p


@dataclass(frozen=True)
class LinearPropensity:
    intercept: float
    slope: float
    c: float = 0.05

    def prob(self, t: int, x: float) -> float:
        treated = self.intercept + self.slope * x
        return treated if t == 1 else 1.0 - treated


@dataclass(frozen=True)
class ConstantSelection:
    p: float

    @property
    def floor(self) -> float:
        return self.p

    def prob(self, x: float, y, t: int):
        return np.full(np.shape(y), self.p) if np.ndim(y) else self.p

    def breakpoints(self, x: float, t: int) -> Tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class LogisticSelection:
    """s = d + (1 - d) * sigmoid(intercept + bx x + by y + bt t)"""
    intercept: float = 0.0
    bx: float = 0.0
    by: float = 0.0
    bt: float = 0.0
    d: float = 0.1

    @property
    def floor(self) -> float:
        return self.d

    def prob(self, x: float, y, t: int):
        return self.d + (1.0 - self.d) * expit(self.intercept + self.bx * x + self.by * np.asarray(y) + self.bt * t)

    def breakpoints(self, x: float, t: int) -> Tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class GaussianBumpSelection:
    """s = scale * phi(y - center); floor 0"""
    center: float
    scale: float = 0.5 * math.sqrt(2.0 * math.pi)

    def __post_init__(self):
        if not 0.0 < self.scale <= math.sqrt(2.0 * math.pi):
            raise ConfigError("gaussian bump scale must keep the selection probability in (0, 1]")

    @property
    def floor(self) -> float:
        return 0.0

    def prob(self, x: float, y, t: int):
        return self.scale * stats.norm.pdf(np.asarray(y) - self.center)

    def breakpoints(self, x: float, t: int) -> Tuple[float, ...]:
        return (self.center,)


@dataclass(frozen=True)
class IntervalSelection:
    """Deterministic selection: kept iff low <= variable <= high"""
    variable: str = "y"
    low: float = -np.inf
    high: float = np.inf

    def __post_init__(self):
        if self.variable not in ("x", "y"):
            raise ConfigError(f"interval selection acts on 'x' or 'y', got '{self.variable}'")
        if self.low > self.high:
            raise ConfigError("interval selection needs low <= high")

    @property
    def floor(self) -> float:
        return 0.0

    def prob(self, x: float, y, t: int):
        if self.variable == "x":
            inside = float(self.low <= x <= self.high)
            return np.full(np.shape(y), inside) if np.ndim(y) else inside
        y = np.asarray(y, dtype=float)
        inside = ((y >= self.low) & (y <= self.high)).astype(float)
        return inside if inside.ndim else float(inside)

    def breakpoints(self, x: float, t: int) -> Tuple[float, ...]:
        if self.variable == "x":
            return ()
        return tuple(v for v in (self.low, self.high) if np.isfinite(v))


@dataclass
class ParamTuple:
    """
    A data-generating model on a finite x-grid: marginal weights over the
    grid, a propensity with declared overlap c, per-(t, x) outcome
    distributions and a selection mechanism.
    """
    x_grid: Tuple[float, ...]
    x_weights: Tuple[float, ...]
    propensity: object
    outcomes: Dict[Tuple[int, float], object]
    selection: object

    def validate(self) -> None:
        if len(self.x_grid) == 0 or len(self.x_grid) != len(self.x_weights):
            raise ConfigError("x_grid and x_weights must be non-empty and of equal length")
        weights = np.asarray(self.x_weights, dtype=float)
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ConfigError("x_weights must be positive and sum to 1")
        c = self.propensity.c
        for x in self.x_grid:
            p = self.propensity.prob(1, x)
            if not c < p < 1.0 - c:
                raise ConfigError(f"propensity {p:.4g} at x={x} violates the declared overlap c={c}")
            for t in (0, 1):
                if (t, x) not in self.outcomes:
                    raise ConfigError(f"missing outcome distribution for t={t}, x={x}")
        if not 0.0 <= self.selection.floor <= 1.0:
            raise ConfigError("selection floor must lie in [0, 1]")

    def weight(self, x: float) -> float:
        for grid_x, w in zip(self.x_grid, self.x_weights):
            if grid_x == x:
                return float(w)
        return 0.0

    def ate(self) -> float:
        return float(sum(w * (self.outcomes[(1, x)].mean() - self.outcomes[(0, x)].mean())
                         for x, w in zip(self.x_grid, self.x_weights)))

    def selected_mass(self, x: float, t: int) -> float:
        """Integral of s(x, y, t) f(y | t, x) over y"""
        outcome = self.outcomes[(t, x)]
        low, high = outcome.support()
        cuts = [v for v in self.selection.breakpoints(x, t) if low < v < high]
        edges = [low, *sorted(cuts), high]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            total += _quad(lambda y: float(self.selection.prob(x, y, t)) * float(outcome.pdf(y)),
                           a, b, f"P(s) at x={x}, t={t}")
        return total

    def p_selected(self) -> float:
        return float(sum(w * self.propensity.prob(t, x) * self.selected_mass(x, t)
                         for x, w in zip(self.x_grid, self.x_weights) for t in (0, 1)))

    def log_selected_density(self, x: float, y: float, t: int, log_p_s: float) -> float:
        """log of alpha * p(t|x) * p(x, y(t)) with alpha = s(x, y, t) / P(s)"""
        weight = self.weight(x)
        outcome = self.outcomes.get((t, x))
        if weight <= 0 or outcome is None or not outcome.in_support(y):
            return -np.inf
        s = float(self.selection.prob(x, y, t))
        if s <= 0:
            return -np.inf
        return (math.log(s) - log_p_s + math.log(self.propensity.prob(t, x))
                + math.log(weight) + float(outcome.logpdf(y)))


@dataclass
class Witness:
    x: float
    y: Optional[float]
    t: Optional[int]
    kind: str = "joint"
    log_p: float = 0.0
    log_q: float = 0.0


@dataclass
class Condition2Report:
    ate_gap: float
    tau_p: float
    tau_q: float
    witness: Optional[Witness]
    verdict: str
    p_selected_p: float
    p_selected_q: float
    external_unbiased_x: bool = False

    @property
    def message(self) -> str:
        return VERDICT_MESSAGES[self.verdict]


def default_y_grid() -> np.ndarray:
    """Linear grid on [-10, 10] joined with ±2^k, ±2^-k, ordered by |y|"""
    values = np.unique(np.concatenate([np.linspace(-10.0, 10.0, 201), geometric_candidates()]))
    return values[np.lexsort((values, np.abs(values)))]


def _differs(log_p: float, log_q: float) -> bool:
    if np.isneginf(log_p) and np.isneginf(log_q):
        return False
    if np.isneginf(log_p) or np.isneginf(log_q):
        return True
    scale = max(abs(log_p), abs(log_q))
    return abs(log_p - log_q) > RELATIVE_TOL + 64 * np.finfo(float).eps * scale


def check_condition2(tuple_p: ParamTuple, tuple_q: ParamTuple,
                     grid: Optional[Sequence[float]] = None,
                     external_unbiased_x: bool = False) -> Condition2Report:
    """
    Check the identifiability implication "ATE_P != ATE_Q implies the
    selected distributions differ" for one pair of tuples.

    Args:
        tuple_p, tuple_q: Compatible parametric models
        grid: y values to search (default_y_grid() when omitted)
        external_unbiased_x: Also accept a difference of the unselected
            x-marginals as a witness

    Returns:
        Condition2Report; the verdict only speaks for this pair

    Raises:
        ConfigError: If a tuple fails validation
        QuadratureError: If an integral does not converge
    """
    tuple_p.validate()
    tuple_q.validate()
    y_grid = default_y_grid() if grid is None else np.asarray(grid, dtype=float)

    tau_p, tau_q = tuple_p.ate(), tuple_q.ate()
    gap = abs(tau_p - tau_q)
    ps_p, ps_q = tuple_p.p_selected(), tuple_q.p_selected()
    if ps_p <= 0 or ps_q <= 0:
        raise ConfigError("a tuple selects no units: P(s) = 0")
    log_ps_p, log_ps_q = math.log(ps_p), math.log(ps_q)

    witness = None
    if external_unbiased_x:
        for x in sorted(set(tuple_p.x_grid) | set(tuple_q.x_grid)):
            wp, wq = tuple_p.weight(x), tuple_q.weight(x)
            if _differs(math.log(wp) if wp > 0 else -np.inf, math.log(wq) if wq > 0 else -np.inf):
                witness = Witness(x=x, y=None, t=None, kind="marginal_x",
                                  log_p=math.log(wp) if wp > 0 else -np.inf,
                                  log_q=math.log(wq) if wq > 0 else -np.inf)
                break

    if witness is None:
        witness = _scan_products(tuple_p, tuple_q, y_grid, log_ps_p, log_ps_q)

    if gap <= ATE_TOL * max(1.0, abs(tau_p), abs(tau_q)):
        verdict = Verdict.CONSISTENT_EQUAL_ATE
    elif witness is not None:
        verdict = Verdict.CONSISTENT_DETECTABLE
    else:
        verdict = Verdict.VIOLATED
    logger.info("identifiability check: gap=%.6g verdict=%s", gap, verdict)
    return Condition2Report(ate_gap=gap, tau_p=tau_p, tau_q=tau_q, witness=witness,
                            verdict=verdict, p_selected_p=ps_p, p_selected_q=ps_q,
                            external_unbiased_x=external_unbiased_x)


def _scan_products(tuple_p: ParamTuple, tuple_q: ParamTuple, y_grid: np.ndarray,
                   log_ps_p: float, log_ps_q: float) -> Optional[Witness]:
    for x in sorted(set(tuple_p.x_grid) | set(tuple_q.x_grid)):
        for t in (0, 1):
            for y in y_grid:
                y = float(y)
                log_p = tuple_p.log_selected_density(x, y, t, log_ps_p)
                log_q = tuple_q.log_selected_density(x, y, t, log_ps_q)
                if _differs(log_p, log_q):
                    return Witness(x=x, y=y, t=t, log_p=log_p, log_q=log_q)
    return None


# JSON schema

def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing key '{key}'")
    return d[key]


def _outcome_from_dict(d: dict, x: float, where: str):
    kind = _require(d, "kind", where)
    params = d.get("params", {})
    if kind == FamilyKind.POLY_EXPONENT:
        terms = {(int(i), int(j)): float(a) for i, j, a in _require(params, "terms", where)}
        return PolyExponentConditional(PolyExponent(terms, tuple(params.get("marginal", ()))), x)
    names = {
        FamilyKind.GAUSSIAN: ("mu", "sigma"),
        FamilyKind.LAPLACE: ("mu", "b"),
        FamilyKind.PARETO: ("y_m", "alpha"),
        FamilyKind.LOGNORMAL: ("mu", "sigma"),
    }
    if kind not in names:
        raise ConfigError(f"{where}: unknown outcome kind '{kind}'")
    return OutcomeFamily(kind, tuple(float(_require(params, name, where)) for name in names[kind]))


def _propensity_from_dict(d: dict):
    kind = _require(d, "kind", "propensity")
    if kind == "constant":
        return ConstantPropensity(float(_require(d, "p", "propensity")), float(d.get("c", 0.05)))
    if kind == "linear":
        return LinearPropensity(float(_require(d, "intercept", "propensity")),
                                float(_require(d, "slope", "propensity")), float(d.get("c", 0.05)))
    raise ConfigError(f"propensity: unknown kind '{kind}'. Available: constant, linear")


def _selection_from_dict(d: dict):
    kind = _require(d, "kind", "selection")
    if kind == "constant":
        return ConstantSelection(float(_require(d, "p", "selection")))
    if kind == "logistic":
        return LogisticSelection(float(d.get("intercept", 0.0)), float(d.get("x", 0.0)),
                                 float(d.get("y", 0.0)), float(d.get("t", 0.0)),
                                 float(d.get("floor", 0.1)))
    if kind == "gaussian_bump":
        return GaussianBumpSelection(float(_require(d, "center", "selection")),
                                     float(d.get("scale", 0.5 * math.sqrt(2.0 * math.pi))))
    if kind == "interval":
        return IntervalSelection(d.get("variable", "y"), float(d.get("low", -np.inf)),
                                 float(d.get("high", np.inf)))
    raise ConfigError(f"selection: unknown kind '{kind}'. "
                      f"Available: constant, logistic, gaussian_bump, interval")


def tuple_from_dict(d: dict) -> ParamTuple:
    """
    Build a ParamTuple from its JSON form:

        {"x_grid": [...], "x_weights": [...],
         "propensity": {"kind": "linear", "intercept": 0.5, "slope": 0.1, "c": 0.05},
         "selection": {"kind": "logistic", "y": 1.0, "floor": 0.2},
         "outcomes": {"0": {"kind": "gaussian", "params": {"mu": 0, "sigma": 1}},
                      "1": [{"x": 0.0, "kind": ..., "params": ...}, ...]}}

    An outcome entry given as one object applies to every x; a list gives
    one entry per x. x_weights default to uniform.
    """
    x_grid = tuple(float(x) for x in _require(d, "x_grid", "tuple"))
    weights = d.get("x_weights")
    x_weights = tuple(float(w) for w in weights) if weights else tuple([1.0 / len(x_grid)] * len(x_grid))
    outcomes = {}
    for arm_key, entry in _require(d, "outcomes", "tuple").items():
        t = int(arm_key)
        if t not in (0, 1):
            raise ConfigError(f"outcomes: arm must be 0 or 1, got {arm_key}")
        if isinstance(entry, list):
            for item in entry:
                x = float(_require(item, "x", f"outcomes[{t}]"))
                outcomes[(t, x)] = _outcome_from_dict(item, x, f"outcomes[{t}]")
        else:
            for x in x_grid:
                outcomes[(t, x)] = _outcome_from_dict(entry, x, f"outcomes[{t}]")
    result = ParamTuple(x_grid=x_grid, x_weights=x_weights,
                        propensity=_propensity_from_dict(_require(d, "propensity", "tuple")),
                        outcomes=outcomes,
                        selection=_selection_from_dict(_require(d, "selection", "tuple")))
    result.validate()
    return result


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def report_to_dict(report: Condition2Report) -> dict:
    witness = None
    if report.witness is not None:
        w = report.witness
        witness = {"kind": w.kind, "x": w.x, "y": w.y, "t": w.t,
                   "log_p": _finite_or_none(w.log_p), "log_q": _finite_or_none(w.log_q)}
    return {
        "ate_gap": report.ate_gap,
        "tau_p": report.tau_p,
        "tau_q": report.tau_q,
        "p_selected": {"p": report.p_selected_p, "q": report.p_selected_q},
        "external_unbiased_x": report.external_unbiased_x,
        "witness": witness,
        "verdict": report.verdict,
        "message": report.message,
    }


def check_from_dict(d: dict) -> Condition2Report:
    """Run check_condition2 on an idcheck JSON document {"P": ..., "Q": ...}"""
    grid = d.get("y_grid")
    return check_condition2(tuple_from_dict(_require(d, "P", "idcheck")),
                            tuple_from_dict(_require(d, "Q", "idcheck")),
                            grid=grid, external_unbiased_x=bool(d.get("external_unbiased_x", False)))
