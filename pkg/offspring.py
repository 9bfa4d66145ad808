#!/usr/bin/env python3
"""
Offspring distributions of the untraced branching process.

Every law is proper (sum p_k = 1). Each one exposes its p.g.f. G, the first
two derivatives, exact vectorised samplers and an inversion quantile used by
the hashed per-vertex uniforms of the reference simulator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import stats

logger = logging.getLogger(__name__)

PMF_SUM_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the domain of an offspring operation."""


def _check_unit(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0,1], got {value}")


def _as_result(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class OffspringDistribution:
    """Common interface; subclasses supply the closed forms and samplers."""

    kind = "abstract"

    # Subclass hooks -----------------------------------------------------
    def _pgf(self, u):
        raise NotImplementedError

    def _derivative(self, u, order):
        raise NotImplementedError

    def _cdf_table(self) -> np.ndarray:
        raise NotImplementedError

    def sample_sum(self, rng: np.random.Generator, counts) -> np.ndarray:
        """Sum of counts[i] independent offspring numbers, for every i."""
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError

    # Public interface ---------------------------------------------------
    def pgf(self, u):
        _check_unit("u", u)
        return _as_result(self._pgf(u))

    def derivative(self, u, order: int = 1):
        _check_unit("u", u)
        if order not in (1, 2):
            raise DomainError(f"derivative order must be 1 or 2, got {order}")
        return _as_result(self._derivative(u, order))

    @property
    def mean(self) -> float:
        return float(self._derivative(1.0, 1))

    @property
    def second_factorial_moment(self) -> float:
        """G''(1) = E[V(V-1)]."""
        return float(self._derivative(1.0, 2))

    @cached_property
    def cdf(self) -> np.ndarray:
        return self._cdf_table()

    def pmf(self, k: int) -> float:
        cdf = self.cdf
        if k < 0 or k >= len(cdf):
            return 0.0
        return float(cdf[k] - (cdf[k - 1] if k > 0 else 0.0))

    def quantile(self, u: float) -> int:
        """Smallest k with F(k) > u, i.e. inversion of a uniform on [0,1)."""
        k = int(np.searchsorted(self.cdf, u, side="right"))
        return min(k, len(self.cdf) - 1)

    def sample(self, rng: np.random.Generator) -> int:
        return int(self.sample_sum(rng, np.ones(1, dtype=np.int64))[0])

    def __str__(self):
        return self.spec


@dataclass(frozen=True)
class Poisson(OffspringDistribution):
    lam: float

    kind = "poisson"

    def __post_init__(self):
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise DomainError(f"Poisson mean must be positive, got {self.lam}")

    def _pgf(self, u):
        return np.exp(self.lam * (np.asarray(u, dtype=float) - 1.0))

    def _derivative(self, u, order):
        return self.lam ** order * self._pgf(u)

    def _cdf_table(self):
        k_max = int(math.ceil(self.lam + 12.0 * math.sqrt(self.lam) + 30.0))
        cdf = stats.poisson.cdf(np.arange(k_max + 1), self.lam)
        cdf[-1] = 1.0
        return cdf

    def sample_sum(self, rng, counts):
        counts = np.asarray(counts, dtype=np.int64)
        return rng.poisson(self.lam * counts)

    @property
    def spec(self):
        return f"poisson:{self.lam:g}"


@dataclass(frozen=True)
class Geometric(OffspringDistribution):
    """p_k = q (1-q)^k for k >= 0, mean (1-q)/q."""

    q: float

    kind = "geometric"

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise DomainError(f"geometric success probability must lie in (0,1), got {self.q}")

    def _pgf(self, u):
        u = np.asarray(u, dtype=float)
        return self.q / (1.0 - (1.0 - self.q) * u)

    def _derivative(self, u, order):
        u = np.asarray(u, dtype=float)
        r = 1.0 - self.q
        base = 1.0 - r * u
        if order == 1:
            return self.q * r / base ** 2
        return 2.0 * self.q * r ** 2 / base ** 3

    def _cdf_table(self):
        k_max = int(math.ceil(40.0 / self.q)) + 40
        cdf = 1.0 - (1.0 - self.q) ** (np.arange(k_max + 1) + 1.0)
        cdf[-1] = 1.0
        return cdf

    def quantile(self, u):
        return int(math.floor(math.log1p(-u) / math.log1p(-self.q)))

    def sample_sum(self, rng, counts):
        counts = np.asarray(counts, dtype=np.int64)
        out = np.zeros(counts.shape, dtype=np.int64)
        mask = counts > 0
        if np.any(mask):
            out[mask] = rng.negative_binomial(counts[mask], self.q)
        return out

    @property
    def spec(self):
        return f"geometric:{self.q:g}"


@dataclass(frozen=True)
class Binomial(OffspringDistribution):
    n: int
    q: float

    kind = "binomial"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"binomial size must be a positive integer, got {self.n}")
        if not (0.0 <= self.q <= 1.0):
            raise DomainError(f"binomial probability must lie in [0,1], got {self.q}")

    def _pgf(self, u):
        return (1.0 - self.q + self.q * np.asarray(u, dtype=float)) ** self.n

    def _derivative(self, u, order):
        if self.n < order:
            return np.zeros_like(np.asarray(u, dtype=float))
        base = 1.0 - self.q + self.q * np.asarray(u, dtype=float)
        return math.perm(self.n, order) * self.q ** order * base ** (self.n - order)

    def _cdf_table(self):
        cdf = stats.binom.cdf(np.arange(self.n + 1), self.n, self.q)
        cdf[-1] = 1.0
        return cdf

    def sample_sum(self, rng, counts):
        counts = np.asarray(counts, dtype=np.int64)
        return rng.binomial(self.n * counts, self.q)

    @property
    def spec(self):
        return f"binomial:{self.n}:{self.q:g}"


@dataclass(frozen=True)
class FinitePmf(OffspringDistribution):
    weights: Tuple[float, ...]

    kind = "pmf"

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if not weights:
            raise DomainError("pmf needs at least one weight")
        if any(w < 0.0 or not math.isfinite(w) for w in weights):
            raise DomainError(f"pmf weights must be nonnegative, got {weights}")
        total = math.fsum(weights)
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise DomainError(f"pmf weights sum to {total!r}, not 1 (improper laws are rejected)")
        object.__setattr__(self, "weights", weights)

    @property
    def support_size(self) -> int:
        return len(self.weights)

    def _pgf(self, u):
        return npoly.polyval(np.asarray(u, dtype=float), self.weights)

    def _derivative(self, u, order):
        coeffs = npoly.polyder(np.asarray(self.weights), order)
        return npoly.polyval(np.asarray(u, dtype=float), coeffs)

    def _cdf_table(self):
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        return cdf

    def pmf(self, k):
        return self.weights[k] if 0 <= k < len(self.weights) else 0.0

    def sample_sum(self, rng, counts):
        counts = np.asarray(counts, dtype=np.int64)
        pvals = np.asarray(self.weights) / math.fsum(self.weights)
        draws = rng.multinomial(counts, pvals)
        return draws @ np.arange(len(self.weights), dtype=np.int64)

    @property
    def spec(self):
        return "pmf:" + ",".join(f"{w:g}" for w in self.weights)


def parse_offspring(text: str) -> OffspringDistribution:
    """Parse `poisson:2.5`, `geometric:0.4`, `binomial:4:0.6` or `pmf:0.1,0.3,0.6`."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "poisson":
            return Poisson(float(rest))
        if kind == "geometric":
            return Geometric(float(rest))
        if kind == "binomial":
            n, q = rest.split(":")
            return Binomial(int(n), float(q))
        if kind == "pmf":
            return FinitePmf(tuple(float(w) for w in rest.split(",")))
    except (TypeError, ValueError) as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"malformed offspring spec {text!r}: {e}") from e
    raise DomainError(f"unknown offspring kind {kind!r} in {text!r}")


def pgf(dist: OffspringDistribution, u):
    """G(u) = sum p_k u^k."""
    return dist.pgf(u)


def pgf_derivative(dist: OffspringDistribution, u, order: int = 1):
    """G'(u) or G''(u)."""
    return dist.derivative(u, order)


def _thinned_argument(alpha, u):
    _check_unit("alpha", alpha)
    _check_unit("u", u)
    return np.minimum(1.0, 1.0 - alpha + alpha * np.asarray(u, dtype=float))


def thinned_pgf(dist: OffspringDistribution, alpha: float, u):
    """G_T(u) = G(1 - alpha + alpha u), the p.g.f. of the traceable offspring count."""
    return dist.pgf(_as_result(_thinned_argument(alpha, u)))


def thinned_pgf_derivative(dist: OffspringDistribution, alpha: float, u):
    """G_T'(u) = alpha G'(1 - alpha + alpha u)."""
    return alpha * dist.derivative(_as_result(_thinned_argument(alpha, u)), 1)


def sample_offspring_split(dist: OffspringDistribution, alpha: float,
                           rng: np.random.Generator) -> Tuple[int, int]:
    """Draw (V^T, V^U): total offspring from the law, traceable part Binomial(total, alpha)."""
    total = dist.sample(rng)
    v_t = int(rng.binomial(total, alpha))
    return v_t, total - v_t
