#!/usr/bin/env python3
"""
Monte Carlo estimators and exact oracles.

Every trial (or chunk of clusters) draws from its own generator seeded by
mix64(master_seed, index) and results are reduced in index order, so an
estimate depends only on the master seed whatever the worker count.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

import sim_cluster
from analytics import CtpParams, c1, classify_extinction, malthusian_theta
from config import CHUNK_SIZE, FIXED_POINT_TOL, GROWTH_POPULATION_CAP, MC_WORKERS, ORACLE_PATH_CAP, master_seed
from offspring import DomainError, FinitePmf, OffspringDistribution
from streams import trial_rng
from trajectory import ExplosionCapError

logger = logging.getLogger(__name__)

Z95 = 1.959963984540054
MIN_TRIALS = 100
MIN_BIN_COUNT = 10


class NoSurvivorsError(RuntimeError):
    """No run survived to the horizon; there is no growth to measure."""


class OracleLimitError(RuntimeError):
    """Exhaustive enumeration would exceed the weighted-path cap."""


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int
    ci95: Tuple[float, float]

    @classmethod
    def from_moments(cls, total: float, total_sq: float, trials: int) -> "Estimate":
        mean = total / trials
        var = max(0.0, (total_sq - trials * mean * mean) / (trials - 1)) if trials > 1 else 0.0
        stderr = math.sqrt(var / trials)
        return cls(mean, stderr, trials, (mean - Z95 * stderr, mean + Z95 * stderr))

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "Estimate":
        values = np.asarray(samples, dtype=float)
        return cls.from_moments(float(values.sum()), float(np.square(values).sum()), len(values))

    @classmethod
    def from_proportion(cls, successes: int, trials: int) -> "Estimate":
        """Frequency with a Wilson score interval."""
        phat = successes / trials
        stderr = math.sqrt(phat * (1.0 - phat) / trials)
        z2 = Z95 * Z95
        centre = (phat + z2 / (2 * trials)) / (1.0 + z2 / trials)
        half = Z95 * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4 * trials * trials)) / (1.0 + z2 / trials)
        return cls(phat, stderr, trials, (max(0.0, centre - half), min(1.0, centre + half)))

    def z_score(self, reference: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.value == reference else math.copysign(math.inf, self.value - reference)
        return (self.value - reference) / self.stderr

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "trials": self.trials, "ci95": list(self.ci95)}


def _seed(value: Optional[int]) -> int:
    return master_seed() if value is None else int(value)


def _map(func, tasks: List[tuple], workers: Optional[int]):
    workers = MC_WORKERS if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            return pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
    return [func(task) for task in tasks]


def _extinction_trial(task) -> bool:
    params, horizon, seed, index, cap = task
    try:
        trajectory = sim_cluster.run(params, horizon, trial_rng(seed, index), cap)
    except ExplosionCapError:
        return False
    return trajectory.extinct


def estimate_extinction_probability(params: CtpParams, horizon: int, trials: int,
                                    master_seed: Optional[int] = None, workers: Optional[int] = None,
                                    cap: int = GROWTH_POPULATION_CAP) -> Estimate:
    """Frequency of {Z^CT_n = 0 for some n <= horizon}.

    A lower bound on the extinction probability; runs that reach the
    population cap count as surviving.
    """
    if trials < MIN_TRIALS:
        raise DomainError(f"need at least {MIN_TRIALS} trials, got {trials}")
    seed = _seed(master_seed)
    tasks = [(params, horizon, seed, i, cap) for i in range(trials)]
    extinct = _map(_extinction_trial, tasks, workers)
    estimate = Estimate.from_proportion(int(sum(extinct)), trials)
    logger.info(f"extinction by generation {horizon}: {estimate.value:.4f} ± {estimate.stderr:.4f} ({params.as_dict()})")
    return estimate


def _growth_trial(task) -> Optional[float]:
    params, horizon, window_start, seed, index, cap = task
    try:
        trajectory = sim_cluster.run(params, horizon, trial_rng(seed, index), cap)
    except ExplosionCapError as e:
        trajectory = e.trajectory
    if trajectory.extinct:
        return None
    sizes = np.asarray(trajectory.zct[window_start:], dtype=float)
    if sizes.size < 2:
        return math.nan
    generations = np.arange(window_start, window_start + sizes.size)
    return float(np.polyfit(generations, np.log(sizes), 1)[0])


def estimate_growth_rate(params: CtpParams, horizon: int, trials: int, window_start: Optional[int] = None,
                         master_seed: Optional[int] = None, workers: Optional[int] = None,
                         cap: int = GROWTH_POPULATION_CAP) -> Estimate:
    """Mean least-squares slope of ln Z^CT_n on [window_start, horizon] over surviving runs.

    Runs that hit the population cap are regressed over the generations
    simulated; those capped before two window points are dropped.
    """
    verdict = classify_extinction(params)
    if verdict.extinct:
        raise DomainError(f"growth rate needs a surviving configuration, got {verdict.verdict.value} ({verdict.rule})")
    if window_start is None:
        window_start = horizon // 3
    if not 0 <= window_start < horizon:
        raise DomainError(f"window_start must lie in [0, horizon), got {window_start}")

    seed = _seed(master_seed)
    tasks = [(params, horizon, window_start, seed, i, cap) for i in range(trials)]
    slopes = [s for s in _map(_growth_trial, tasks, workers) if s is not None]
    dropped = sum(1 for s in slopes if math.isnan(s))
    slopes = [s for s in slopes if not math.isnan(s)]
    if dropped:
        logger.warning(f"{dropped} surviving runs capped before generation {window_start + 1}; dropped")
    if not slopes:
        raise NoSurvivorsError(f"no run of {trials} survived to generation {horizon}")
    estimate = Estimate.from_samples(slopes)
    logger.info(f"growth rate over [{window_start}, {horizon}]: {estimate.value:.4f} ± {estimate.stderr:.4f} "
                f"from {len(slopes)} survivors")
    return estimate


def _batch_task(task):
    params, count, seed, index = task
    batch = sim_cluster.sample_seed_offspring_batch(params, count, trial_rng(seed, index))
    totals = batch.totals.astype(np.float64)
    return float(totals.sum()), float(np.square(totals).sum()), batch.vu_sum, batch.vu_sumsq


def _cluster_moments(params: CtpParams, clusters: int, master_seed: Optional[int], workers: Optional[int],
                     chunk_size: int):
    if params.p <= 0.0:
        raise DomainError("cluster estimates need p > 0")
    seed = _seed(master_seed)
    sizes = [chunk_size] * (clusters // chunk_size)
    if clusters % chunk_size:
        sizes.append(clusters % chunk_size)
    tasks = [(params, size, seed, index) for index, size in enumerate(sizes)]
    total = total_sq = 0.0
    vu_sum = np.zeros(1)
    vu_sumsq = np.zeros(1)
    for chunk_total, chunk_sq, chunk_vu, chunk_vusq in _map(_batch_task, tasks, workers):
        total += chunk_total
        total_sq += chunk_sq
        length = max(len(vu_sum), len(chunk_vu))
        vu_sum = np.pad(vu_sum, (0, length - len(vu_sum))) + np.pad(chunk_vu, (0, length - len(chunk_vu)))
        vu_sumsq = np.pad(vu_sumsq, (0, length - len(vu_sumsq))) + np.pad(chunk_vusq, (0, length - len(chunk_vusq)))
    return total, total_sq, vu_sum, vu_sumsq


def estimate_seed_mean(params: CtpParams, clusters: int, master_seed: Optional[int] = None,
                       workers: Optional[int] = None, chunk_size: int = CHUNK_SIZE) -> Estimate:
    """Empirical mean of the seed total of one truncated cluster."""
    total, total_sq, _, _ = _cluster_moments(params, clusters, master_seed, workers, chunk_size)
    return Estimate.from_moments(total, total_sq, clusters)


def estimate_vn(params: CtpParams, n_max: int, trials: int, master_seed: Optional[int] = None,
                workers: Optional[int] = None, chunk_size: int = CHUNK_SIZE) -> List[Estimate]:
    """Empirical means of the truncated seed counts at ages n = 1..n_max."""
    _, _, vu_sum, vu_sumsq = _cluster_moments(params, trials, master_seed, workers, chunk_size)
    vu_sum = np.pad(vu_sum, (0, max(0, n_max + 1 - len(vu_sum))))
    vu_sumsq = np.pad(vu_sumsq, (0, max(0, n_max + 1 - len(vu_sumsq))))
    return [Estimate.from_moments(vu_sum[n], vu_sumsq[n], trials) for n in range(1, n_max + 1)]


@dataclass(frozen=True)
class MartingaleCheck:
    theta: float
    means: List[Estimate]
    slope: Estimate


def _martingale_trial(task) -> List[float]:
    params, horizon, theta, seed, index = task
    path = sim_cluster.run_seed_process(params, horizon, trial_rng(seed, index))
    return [math.exp(-theta * n) * sum(count * math.exp(-theta * k) for k, count in schedule.items())
            for n, schedule in enumerate(path.schedules)]


def estimate_martingale(params: CtpParams, horizon: int, trials: int, master_seed: Optional[int] = None,
                        theta: Optional[float] = None, workers: Optional[int] = None) -> MartingaleCheck:
    """E[Y_n], Y_n = e^{-theta n} sum_k R_n(k) e^{-k theta}, and the mean per-run slope of Y_n in n."""
    if theta is None:
        theta = malthusian_theta(params)
    seed = _seed(master_seed)
    tasks = [(params, horizon, theta, seed, i) for i in range(trials)]
    paths = np.asarray(_map(_martingale_trial, tasks, workers))
    means = [Estimate.from_samples(paths[:, n]) for n in range(horizon + 1)]
    generations = np.arange(horizon + 1)
    slopes = np.polyfit(generations, paths.T, 1)[0]
    return MartingaleCheck(theta=theta, means=means, slope=Estimate.from_samples(slopes))


@lru_cache(maxsize=None)
def _thinned_pmf(weights: Tuple[float, ...], alpha: float) -> Tuple[float, ...]:
    """Law of the traceable count, by enumerating the trace flag of every child."""
    out = np.zeros(len(weights))
    for k, weight in enumerate(weights):
        if weight == 0.0:
            continue
        for flags in range(1 << k):
            traced = bin(flags).count("1")
            out[traced] += weight * alpha ** traced * (1.0 - alpha) ** (k - traced)
    return tuple(out)


class _Convolutions:
    def __init__(self, thinned: Tuple[float, ...]):
        self.base = np.asarray(thinned)
        self.cache: Dict[int, np.ndarray] = {1: self.base}

    def __call__(self, v: int) -> np.ndarray:
        if v not in self.cache:
            self.cache[v] = np.convolve(self(v - 1), self.base)
        return self.cache[v]


def _add_into(target: np.ndarray, values: np.ndarray) -> np.ndarray:
    if len(values) > len(target):
        target = np.pad(target, (0, len(values) - len(target)))
    target[:len(values)] += values
    return target


def oracle_seed_mean_small(dist: FinitePmf, b: int, p: float, alpha: float,
                           depth_cap: int) -> Tuple[float, float]:
    """Exact expected seed total of a truncated cluster restricted to ages <= depth_cap.

    Enumerates every (offspring, trace, detection) outcome with its exact
    weight, aggregated by (cluster size, generations left before removal).
    Returns (value, bound on the omitted ages).
    """
    if not isinstance(dist, FinitePmf) or dist.support_size > 3:
        raise DomainError("oracle needs a finite pmf with support size <= 3")
    if not (0 <= b <= 1):
        raise DomainError(f"oracle needs b <= 1, got {b}")
    if not (0 < depth_cap <= 12):
        raise DomainError(f"depth_cap must lie in 1..12, got {depth_cap}")
    if not (0.0 < p <= 1.0 and 0.0 <= alpha <= 1.0):
        raise DomainError(f"oracle needs p in (0,1] and alpha in [0,1], got p={p}, alpha={alpha}")

    lam = dist.mean
    lam_u, lam_t = lam * (1.0 - alpha), lam * alpha
    convolutions = _Convolutions(_thinned_pmf(dist.weights, alpha))

    def survive(size):
        return (1.0 - p) ** np.arange(size)

    undetected = np.zeros(2)
    undetected[1] = 1.0 - p
    countdown: Dict[int, np.ndarray] = {}
    if b >= 1:
        countdown[b] = np.zeros(2)
        countdown[b][1] = p

    value, paths = 0.0, 0
    for _ in range(depth_cap):
        members = np.arange(len(undetected)) @ undetected
        members += sum(np.arange(len(arr)) @ arr for arr in countdown.values())
        value += lam_u * members

        next_undetected = np.zeros(1)
        next_countdown: Dict[int, np.ndarray] = {}
        for v in np.flatnonzero(undetected):
            if v == 0:
                continue
            row = undetected[v] * convolutions(int(v))
            paths += len(row)
            stay = row * survive(len(row))
            next_undetected = _add_into(next_undetected, stay)
            if b >= 1:
                next_countdown[b] = _add_into(next_countdown.get(b, np.zeros(1)), row - stay)
        for remaining, arr in countdown.items():
            for v in np.flatnonzero(arr):
                if v == 0:
                    continue
                row = arr[v] * convolutions(int(v))
                paths += len(row)
                if remaining > 1:
                    next_countdown[remaining - 1] = _add_into(next_countdown.get(remaining - 1, np.zeros(1)), row)
        if paths > ORACLE_PATH_CAP:
            raise OracleLimitError(f"{paths} weighted paths exceed cap {ORACLE_PATH_CAP}")
        undetected, countdown = next_undetected, next_countdown

    omitted_prefix = sum(lam_u * lam_t ** (n - 1) for n in range(depth_cap + 1, b + 1))
    if p == 1.0:
        error_bound = omitted_prefix
    else:
        error_bound = omitted_prefix + lam_u * lam_t ** b * c1(p) * (1.0 - p) ** max(0, depth_cap - b) / p
    logger.debug(f"oracle {dist.spec} b={b} p={p} alpha={alpha}: {value:.12g} (+{error_bound:.3g}), {paths} paths")
    return value, error_bound


def plain_extinction_probability(dist: OffspringDistribution, tol: float = FIXED_POINT_TOL,
                                 max_iter: int = 10_000_000) -> float:
    """Smallest root of G(q) = q, by iterating q <- G(q) from 0."""
    q = 0.0
    for _ in range(max_iter):
        nxt = dist.pgf(q)
        if abs(nxt - q) < tol:
            return nxt
        q = nxt
    raise ArithmeticError("fixed-point iteration for the extinction probability did not settle")


def chi_square_two_sample(first: Sequence[int], second: Sequence[int]) -> Tuple[float, float]:
    """Two-sample chi-square on integer outcomes, adjacent values pooled until each bin holds MIN_BIN_COUNT."""
    first = np.asarray(first, dtype=np.int64)
    second = np.asarray(second, dtype=np.int64)
    values = np.union1d(first, second)
    counts = np.stack([np.array([np.sum(first == v) for v in values]),
                       np.array([np.sum(second == v) for v in values])])

    pooled, current = [], np.zeros(2, dtype=np.int64)
    for column in counts.T:
        current = current + column
        if current.sum() >= MIN_BIN_COUNT:
            pooled.append(current)
            current = np.zeros(2, dtype=np.int64)
    if current.sum():
        if pooled:
            pooled[-1] = pooled[-1] + current
        else:
            pooled.append(current)
    table = np.array(pooled).T
    if table.shape[1] < 2:
        return 0.0, 1.0
    statistic, pvalue, _, _ = stats.chi2_contingency(table, correction=False)
    return float(statistic), float(pvalue)
