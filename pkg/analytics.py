#!/usr/bin/env python3
"""
Deterministic numerics of the contact-tracing process CTP(b, p, alpha).

The cluster-level recursions
    g_0 = h_0 = s,  g_n = s G(1 - a + a g_{n-1}),  h_n = s a G'(1 - a + a g_{n-1}) h_{n-1}
evaluated at s = 1 - p give the expected seed output of one truncated
traceable cluster, v_n per generation and y_b in total. y_b <= 1 decides
extinction, the Malthusian root of sum e^{-n theta} v_n = 1 gives the growth
rate, and bisection in alpha over the extinction verdict gives e_b(p).
"""

import logging
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from config import DEFAULT_TOL, FIXED_POINT_TOL, INITIAL_TRUNCATION, MAX_TRUNCATION
from offspring import DomainError, OffspringDistribution

logger = logging.getLogger(__name__)

THETA_LOWER_OFFSET = 1e-9
THETA_LIMIT = 700.0


class NoCertifiedTruncationError(ArithmeticError):
    """p = 0: the seed series has no certified truncation (and may diverge)."""


class ThetaUndefinedError(ArithmeticError):
    """The transform stays below 1 on the whole admissible bracket."""


class TruncationLimitError(ArithmeticError):
    """The tail could not be certified below tol within MAX_TRUNCATION terms."""


@dataclass(frozen=True)
class CtpParams:
    """A point (b, p, alpha) of the parameter space together with the offspring law."""

    b: int
    p: float
    alpha: float
    dist: OffspringDistribution

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 0:
            raise DomainError(f"b must be a nonnegative integer, got {self.b}")
        if not (0.0 <= self.p <= 1.0):
            raise DomainError(f"p must lie in [0,1], got {self.p}")
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in [0,1], got {self.alpha}")
        object.__setattr__(self, "b", int(self.b))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def lam(self) -> float:
        return self.dist.mean

    @property
    def lam_t(self) -> float:
        return self.lam * self.alpha

    @property
    def lam_u(self) -> float:
        return self.lam * (1.0 - self.alpha)

    @property
    def s(self) -> float:
        return 1.0 - self.p

    def with_alpha(self, alpha: float) -> "CtpParams":
        return replace(self, alpha=alpha)

    def as_dict(self) -> dict:
        return {"offspring": self.dist.spec, "b": self.b, "p": self.p, "alpha": self.alpha}


@dataclass
class AnalyticSequences:
    """Prefixes (index 0..n_max) of g, h, w = h(1-p) and v (v[0] unused, = 0)."""

    s: float
    g: np.ndarray
    h: np.ndarray
    w: np.ndarray
    v: np.ndarray
    tail_bound: float
    h_tail_bound: float

    @property
    def n_max(self) -> int:
        return len(self.g) - 1


class Verdict(str, Enum):
    EXTINCT = "Extinct"
    SURVIVES = "SurvivesWPP"


@dataclass(frozen=True)
class ExtinctionVerdict:
    verdict: Verdict
    seed_mean: Optional[float]
    rule: str

    @property
    def extinct(self) -> bool:
        return self.verdict is Verdict.EXTINCT


@dataclass(frozen=True)
class FixedPoint:
    value: float
    residual: float
    slope: float


def c1(p: float) -> float:
    """(-e log(1-p))^{-1}; h_n(1-p) <= c1(p) (1-p)^n for n >= 1."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"c1 needs p in (0,1), got {p}")
    return 1.0 / (-math.e * math.log1p(-p))


def _recursion(params: CtpParams, n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    s, alpha, dist = params.s, params.alpha, params.dist
    g = np.empty(n_max + 1)
    h = np.empty(n_max + 1)
    g[0] = h[0] = s
    for n in range(1, n_max + 1):
        arg = min(1.0, 1.0 - alpha + alpha * g[n - 1])
        g[n] = s * dist.pgf(arg)
        h[n] = s * alpha * dist.derivative(arg, 1) * h[n - 1]
    return g, h


def _ratio_bound(params: CtpParams, g: np.ndarray) -> float:
    """r with h_{n+1} <= r h_n for every n >= len(g) - 1 (g decreases, G' increases)."""
    arg = min(1.0, 1.0 - params.alpha + params.alpha * g[-1])
    return params.s * params.alpha * params.dist.derivative(arg, 1)


def _h_tail_bound(params: CtpParams, g: np.ndarray, h: np.ndarray) -> float:
    """Certified bound on sum_{m > n_max} h_m(1-p)."""
    s, p = params.s, params.p
    if s == 0.0:
        return 0.0
    n_max = len(h) - 1
    geometric = c1(p) * s ** (n_max + 1) / p
    r = _ratio_bound(params, g)
    ratio = h[-1] * r / (1.0 - r) if r < 1.0 else math.inf
    return min(geometric, ratio)


def _prefix_terms(params: CtpParams, upto: int) -> List[float]:
    """lam_U lam_T^{n-1} for n = 1..upto."""
    return [params.lam_u * params.lam_t ** (n - 1) for n in range(1, upto + 1)]


def compute_sequences(params: CtpParams, n_max: int) -> AnalyticSequences:
    """g, h, w, v up to index n_max with a certified bound on the omitted tail of sum v_n."""
    if params.p <= 0.0:
        raise NoCertifiedTruncationError("p = 0 gives no certified truncation; use the easy-case rules")
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max}")

    b = params.b
    g, h = _recursion(params, n_max)
    coef = params.lam_u * params.lam_t ** b

    v = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        v[n] = params.lam_u * params.lam_t ** (n - 1) if n <= b else coef * h[n - b - 1]

    h_tail = _h_tail_bound(params, g, h)
    remaining_prefix = math.fsum(_prefix_terms(params, b)[n_max:])
    first_omitted = max(0, n_max - b)
    tail = remaining_prefix + coef * (float(np.sum(h[first_omitted:])) + h_tail)

    return AnalyticSequences(s=params.s, g=g, h=h, w=h.copy(), v=v,
                             tail_bound=tail, h_tail_bound=h_tail)


def seed_mean_with_bound(params: CtpParams, tol: float = DEFAULT_TOL) -> Tuple[float, float]:
    """y_b and the certified bound on its truncation error (< tol)."""
    if params.p <= 0.0:
        raise NoCertifiedTruncationError("seed mean undefined for p = 0 (the series may diverge)")

    prefix = math.fsum(_prefix_terms(params, params.b))
    coef = params.lam_u * params.lam_t ** params.b
    if coef == 0.0:
        return prefix, 0.0

    n_max = INITIAL_TRUNCATION
    while True:
        g, h = _recursion(params, n_max)
        tail = coef * _h_tail_bound(params, g, h)
        if tail < tol:
            return prefix + coef * float(np.sum(h)), tail
        if n_max >= MAX_TRUNCATION:
            raise TruncationLimitError(f"tail {tail:.3g} still >= {tol:g} at n_max={n_max} for {params}")
        n_max *= 2
        logger.debug(f"seed_mean: growing truncation to {n_max} (tail {tail:.3g})")


def seed_mean(params: CtpParams, tol: float = DEFAULT_TOL) -> float:
    """y_b(p, alpha) = E[total seeds of one truncated cluster], within tol."""
    return seed_mean_with_bound(params, tol)[0]


def classify_extinction(params: CtpParams, tol: float = DEFAULT_TOL) -> ExtinctionVerdict:
    lam, b, p, alpha = params.lam, params.b, params.p, params.alpha

    if p == 0.0:
        if lam <= 1.0:
            return ExtinctionVerdict(Verdict.EXTINCT, None, "subcritical base")
        return ExtinctionVerdict(Verdict.SURVIVES, None, "no detection")
    if alpha == 1.0:
        return ExtinctionVerdict(Verdict.EXTINCT, 0.0, "full tracing")

    y = seed_mean(params, tol)
    if b == 0 and lam * (1.0 - p) <= 1.0:
        return ExtinctionVerdict(Verdict.EXTINCT, y, "undetected subprocess subcritical")
    if b >= 1 and alpha == 0.0 and lam > 1.0:
        return ExtinctionVerdict(Verdict.SURVIVES, y, "no tracing")
    if abs(y - 1.0) <= tol:
        return ExtinctionVerdict(Verdict.EXTINCT, y, "critical-within-tol")
    if y < 1.0:
        return ExtinctionVerdict(Verdict.EXTINCT, y, "seed mean")
    return ExtinctionVerdict(Verdict.SURVIVES, y, "seed mean")


class _SeedTransform:
    """F(theta) = sum_n e^{-n theta} v_n over a computed h prefix, with certified tail."""

    def __init__(self, params: CtpParams, g: np.ndarray, h: np.ndarray):
        self.params = params
        self.g = g
        self.h = h
        b = params.b
        coef = params.lam_u * params.lam_t ** b
        coefficients = np.concatenate([np.asarray(_prefix_terms(params, b)), coef * h])
        with np.errstate(divide="ignore"):
            self.log_terms = np.log(coefficients)
        self.orders = np.arange(1, len(coefficients) + 1, dtype=float)
        self.log_coef = math.log(coef) if coef > 0.0 else -math.inf
        self.ratio = _ratio_bound(params, g) if params.s > 0.0 else 0.0

    def partial(self, theta: float) -> float:
        exponents = self.log_terms - self.orders * theta
        return float(np.sum(np.exp(np.minimum(exponents, THETA_LIMIT))))

    def tail(self, theta: float) -> float:
        params = self.params
        s = params.s
        if s == 0.0 or self.log_coef == -math.inf:
            return 0.0
        n_max = len(self.h) - 1
        bounds = [math.inf]
        rho = self.ratio * math.exp(-theta)
        if rho < 1.0 and self.log_terms[-1] > -math.inf:
            last = math.exp(min(self.log_terms[-1] - self.orders[-1] * theta, THETA_LIMIT))
            bounds.append(last * rho / (1.0 - rho))
        elif self.log_terms[-1] == -math.inf:
            bounds.append(0.0)
        q = s * math.exp(-theta)
        if q < 1.0:
            log_scale = self.log_coef - (params.b + 1) * theta + (n_max + 1) * math.log(q)
            bounds.append(c1(params.p) * math.exp(min(log_scale, THETA_LIMIT)) / (1.0 - q))
        return min(bounds)

    def lower_end(self, tol: float) -> Optional[float]:
        """Left bracket end with F > 1, None if more terms are needed to decide."""
        s = self.params.s
        if s == 0.0:
            lo = -1.0
            while self.partial(lo) <= 1.0:
                if lo < -THETA_LIMIT:
                    raise ThetaUndefinedError("theta undefined (deep subcritical): transform never reaches 1")
                lo *= 2.0
            return lo
        lo = math.log(s) + THETA_LOWER_OFFSET
        value = self.partial(lo)
        if value > 1.0:
            return lo
        if value + self.tail(lo) < 1.0:
            raise ThetaUndefinedError("theta undefined (deep subcritical): transform below 1 on the whole bracket")
        return None

    def upper_end(self) -> float:
        hi = 1.0
        while self.partial(hi) >= 1.0:
            hi *= 2.0
            if hi > THETA_LIMIT:
                raise ThetaUndefinedError("transform does not fall below 1")
        return hi

    def bisect(self, lo: float, hi: float, tol: float) -> float:
        f_lo, f_hi = self.partial(lo), self.partial(hi)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            f_mid = self.partial(mid)
            if not (f_lo >= f_mid >= f_hi):
                raise ArithmeticError(f"transform not decreasing on [{lo}, {hi}]")
            if f_mid > 1.0:
                lo, f_lo = mid, f_mid
            else:
                hi, f_hi = mid, f_mid
        return 0.5 * (lo + hi)


def malthusian_theta(params: CtpParams, tol: float = DEFAULT_TOL) -> float:
    """Root theta of sum_n e^{-n theta} v_n = 1."""
    if params.p <= 0.0:
        raise NoCertifiedTruncationError("theta needs p > 0")

    y = seed_mean(params, tol)
    if abs(y - 1.0) <= tol:
        return 0.0

    n_max = INITIAL_TRUNCATION
    while True:
        g, h = _recursion(params, n_max)
        transform = _SeedTransform(params, g, h)
        lo = transform.lower_end(tol)
        if lo is not None:
            hi = transform.upper_end()
            logger.debug(f"theta bracket [{lo:.6g}, {hi:.6g}] with {n_max} terms")
            theta = transform.bisect(lo, hi, tol)
            if transform.tail(theta) < tol:
                return theta
        if n_max >= MAX_TRUNCATION:
            raise TruncationLimitError(f"could not certify the transform tail for {params}")
        n_max *= 2


def critical_alpha(dist: OffspringDistribution, b: int, p: float, tol: float = DEFAULT_TOL) -> float:
    """e_b(p): survival below, extinction at and above.

    Bisects on the extinction verdict, which is monotone in alpha even though
    y_b itself is not.
    """
    if p <= 0.0:
        message = "e_b(0) = 1: without detection only full tracing stops the process"
        warnings.warn(message, RuntimeWarning)
        logger.warning(message)
        return 1.0

    def extinct(alpha):
        return classify_extinction(CtpParams(b, p, alpha, dist), tol).extinct

    if extinct(0.0):
        return 0.0
    hi = 1.0 - tol
    if not extinct(hi):
        logger.warning(f"survival at alpha={hi} for b={b}, p={p}; returning 1")
        return 1.0
    lo = 0.0
    while hi - lo > 0.5 * tol:
        mid = 0.5 * (lo + hi)
        if extinct(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def f_b(lam: float, b: int, alpha):
    """lam (1 - alpha) sum_{n<b} (alpha lam)^n, the seed mean at p = 1."""
    if b < 1:
        raise DomainError(f"f_b needs b >= 1, got {b}")
    alpha = np.asarray(alpha, dtype=float)
    total = sum((alpha * lam) ** n for n in range(b))
    result = lam * (1.0 - alpha) * total
    return float(result) if result.ndim == 0 else result


def alpha_crit_p1(lam: float, b: int, tol: float = DEFAULT_TOL) -> float:
    """inf{alpha : f_b(alpha) <= 1}."""
    if b < 1:
        raise DomainError(f"alpha_crit_p1 needs b >= 1, got {b}")
    if lam <= 1.0:
        raise DomainError(f"alpha_crit_p1 needs lam > 1, got {lam}")
    grid = np.linspace(0.0, 1.0, 1001)
    values = f_b(lam, b, grid)
    first = int(np.argmax(values <= 1.0))
    if values[first] == 1.0:
        return float(grid[first])
    return float(optimize.brentq(lambda a: f_b(lam, b, a) - 1.0, grid[first - 1], grid[first],
                                 xtol=tol, rtol=4 * np.finfo(float).eps))


def survival_sufficient_2crit(dist: OffspringDistribution, p: float, alpha: float) -> bool:
    """Two-term lower bound on y_0 exceeds 1, which forces survival."""
    lam = dist.mean
    value = lam * (1.0 - p) * (1.0 - alpha) * (1.0 + alpha * (1.0 - p) * dist.derivative(1.0 - alpha * p, 1))
    return value > 1.0


def survival_sufficient_easy(params: CtpParams) -> bool:
    """Untraced, undetected children alone form a supercritical process."""
    return params.lam * (1.0 - params.p) * (1.0 - params.alpha) > 1.0


def alpha_one_minus_bound(lam: float, b: int) -> Optional[float]:
    """1 - 2 lam^{-b}, a lower bound on e_b(p) whenever 4b < lam^b."""
    if b >= 1 and lam > 1.0 and 4 * b < lam ** b:
        return 1.0 - 2.0 * lam ** (-b)
    return None


def eb_bounds(dist: OffspringDistribution, b: int, p: float) -> Tuple[float, float]:
    """Analytic sandwich lower <= e_b(p) <= upper."""
    lam = dist.mean
    lower = 0.0
    if lam * (1.0 - p) > 1.0:
        lower = max(lower, 1.0 - 1.0 / (lam * (1.0 - p)))
    if b >= 1 and lam > 1.0:
        lower = max(lower, alpha_crit_p1(lam, b))
        large_b = alpha_one_minus_bound(lam, b)
        if large_b is not None:
            lower = max(lower, large_b)
    upper = max(0.0, 1.0 - p / lam) if (b == 0 and p > 0.0) else 1.0
    return lower, upper


def p0(dist: OffspringDistribution) -> float:
    """Detection probability at which e_0 leaves zero: 1 - 1/lam."""
    return 1.0 - 1.0 / dist.mean


def h1_closed_form(params: CtpParams) -> float:
    """h_1(s) = s^2 alpha G'(1 - alpha p)."""
    return params.s ** 2 * params.alpha * params.dist.derivative(1.0 - params.alpha * params.p, 1)


def g_fixed_point(params: CtpParams, tol: float = FIXED_POINT_TOL, max_iter: int = 10_000_000) -> FixedPoint:
    """Limit of g_n: g = s G_T(g), with its contraction slope s G_T'(g)."""
    s, alpha, dist = params.s, params.alpha, params.dist
    if not (0.0 < params.p):
        raise DomainError("fixed point needs p > 0")
    g = s
    for _ in range(max_iter):
        nxt = s * dist.pgf(min(1.0, 1.0 - alpha + alpha * g))
        if abs(nxt - g) < tol:
            g = nxt
            break
        g = nxt
    else:
        raise TruncationLimitError("g-recursion did not settle")
    arg = min(1.0, 1.0 - alpha + alpha * g)
    residual = abs(g - s * dist.pgf(arg))
    slope = s * alpha * dist.derivative(arg, 1)
    return FixedPoint(value=g, residual=residual, slope=slope)


def near_critical_candidates(dist: OffspringDistribution) -> Tuple[float, float]:
    """(lam / (p0 (1-p0) G''(1)), its square root): the two candidate limits of e_0(p)/sqrt(p0-p)."""
    base = p0(dist)
    ratio = dist.mean / (base * (1.0 - base) * dist.second_factorial_moment)
    return ratio, math.sqrt(ratio)


def near_critical_ratios(dist: OffspringDistribution, offsets: Sequence[float],
                         tol: float = DEFAULT_TOL) -> List[float]:
    """e_0(p0 - t) / sqrt(t) for each offset t."""
    base = p0(dist)
    return [critical_alpha(dist, 0, base - t, tol) / math.sqrt(t) for t in offsets]


def mean_matrix_row(params: CtpParams, n_types: int) -> np.ndarray:
    """M_{0,k} = v_{k+1}, k < n_types: mean seeds a type-0 seed schedules k generations ahead."""
    return compute_sequences(params, n_types).v[1:]


def check_eigenvector(params: CtpParams, theta: float, n_types: int) -> float:
    """|(M u)(0) - e^theta u(0)| for u(k) = e^{-k theta} on n_types types (other rows hold exactly)."""
    row = mean_matrix_row(params, n_types)
    k = np.arange(n_types)
    return abs(float(np.sum(row * np.exp(-k * theta))) - math.exp(theta))
