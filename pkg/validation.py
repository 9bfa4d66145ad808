#!/usr/bin/env python3
"""
Cross-module agreement suites.

Each suite prints one line per check and returns True when all of them pass.
`run_validation` runs the suites of a profile and prints a summary; the
`full` profile uses the acceptance sizes, `quick` scales them down.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

import sim_cluster
import sim_direct
from analytics import (CtpParams, alpha_crit_p1, c1, compute_sequences, critical_alpha, g_fixed_point,
                       malthusian_theta, near_critical_candidates, near_critical_ratios, p0, seed_mean)
from config import DEFAULT_TOL, master_seed
from montecarlo import (chi_square_two_sample, estimate_extinction_probability, estimate_growth_rate,
                        estimate_seed_mean, oracle_seed_mean_small)
from offspring import FinitePmf, Poisson
from streams import mix64, trial_rng

logger = logging.getLogger(__name__)

POISSON = Poisson(2.5)
SMALL_PMF = FinitePmf((0.2, 0.3, 0.5))
CHI_SQUARE_LEVEL = 0.001


@dataclass(frozen=True)
class Profile:
    name: str
    clusters: int
    oracle_depth: int
    equivalence_trials: int
    phase_trials: int
    growth_trials: int
    min_survivors: int
    grid_points: int
    coupling_trials: int
    sigmas: float


PROFILES = {
    "full": Profile("full", clusters=1_000_000, oracle_depth=10, equivalence_trials=10_000, phase_trials=10_000,
                    growth_trials=800, min_survivors=500, grid_points=50, coupling_trials=100, sigmas=3.0),
    "quick": Profile("quick", clusters=20_000, oracle_depth=8, equivalence_trials=1_000, phase_trials=1_000,
                     growth_trials=200, min_survivors=100, grid_points=8, coupling_trials=20, sigmas=4.0),
}


def _check(ok: bool, message: str) -> bool:
    print(f"{'✅' if ok else '❌'} {message}")
    return ok


def test_closed_form_criticals(profile: Profile, seed: int) -> bool:
    """e_1(1) = 0.6 and e_2(1) = positive root of 6.25a^2 - 3.75a - 1.5."""
    root = (3.75 + math.sqrt(3.75 ** 2 + 4 * 6.25 * 1.5)) / (2 * 6.25)
    e1 = critical_alpha(POISSON, 1, 1.0)
    e2 = critical_alpha(POISSON, 2, 1.0)
    results = [
        _check(abs(e1 - 0.6) <= 1e-10, f"e_1(1) = {e1:.12f} (expected 0.6)"),
        _check(abs(e2 - root) <= 1e-9, f"e_2(1) = {e2:.12f} (expected {root:.12f})"),
        _check(abs(alpha_crit_p1(2.5, 2) - root) <= 1e-9, "alpha_crit_p1(2.5, 2) matches the quadratic root"),
    ]
    return all(results)


def seed_mean_configurations() -> List[CtpParams]:
    return [CtpParams(b, p, alpha, dist)
            for dist in (POISSON, SMALL_PMF) for b in (0, 1, 2) for p, alpha in ((0.4, 0.3), (1.0, 0.7))]


def test_seed_mean_simulation(profile: Profile, seed: int) -> bool:
    """Empirical seed totals of truncated clusters against y_b."""
    results = []
    for index, params in enumerate(seed_mean_configurations()):
        expected = seed_mean(params)
        estimate = estimate_seed_mean(params, profile.clusters, mix64(seed, index))
        z = estimate.z_score(expected)
        results.append(_check(abs(z) <= profile.sigmas,
                              f"{params.as_dict()}: {estimate.value:.5f} ± {estimate.stderr:.5f} vs {expected:.5f} (z={z:+.2f})"))
    return all(results)


def oracle_configurations() -> List[Tuple[FinitePmf, int, float, float]]:
    dists = (FinitePmf((0.25, 0.5, 0.25)), FinitePmf((0.1, 0.3, 0.6)), FinitePmf((0.5, 0.5)), FinitePmf((0.0, 1.0)))
    return [(dist, b, p, alpha) for dist in dists for b in (0, 1) for p, alpha in ((0.5, 0.5), (0.8, 0.3), (1.0, 0.6))]


def test_oracle_equivalence(profile: Profile, seed: int) -> bool:
    """Exhaustive enumeration against the recursion."""
    results = []
    for dist, b, p, alpha in oracle_configurations():
        value, bound = oracle_seed_mean_small(dist, b, p, alpha, profile.oracle_depth)
        expected = seed_mean(CtpParams(b, p, alpha, dist))
        gap = abs(value - expected)
        results.append(_check(gap <= DEFAULT_TOL + bound + 1e-12,
                              f"{dist.spec} b={b} p={p} alpha={alpha}: |{value:.10f} - {expected:.10f}| = {gap:.2e} "
                              f"<= {bound:.2e}"))
    return all(results)


def equivalence_configurations() -> List[CtpParams]:
    return [CtpParams(b, p, alpha, POISSON) for b in (0, 1) for p in (0.4, 1.0) for alpha in (0.3, 0.7)]


def z3_samples(params: CtpParams, trials: int, seed: int) -> Tuple[List[int], List[int]]:
    direct = [sim_direct.run(params, 3, mix64(seed, i)).zct[3] for i in range(trials)]
    cluster = [sim_cluster.run(params, 3, trial_rng(seed, trials + i)).zct[3] for i in range(trials)]
    return direct, cluster


def test_simulator_equivalence(profile: Profile, seed: int) -> bool:
    """Law of Z^CT_3: genealogy simulator against cluster simulator."""
    results = []
    for index, params in enumerate(equivalence_configurations()):
        direct, cluster = z3_samples(params, profile.equivalence_trials, mix64(seed, index))
        _, pvalue = chi_square_two_sample(direct, cluster)
        results.append(_check(pvalue > CHI_SQUARE_LEVEL,
                              f"{params.as_dict()}: mean {np.mean(direct):.3f} vs {np.mean(cluster):.3f}, p-value {pvalue:.4f}"))
    return all(results)


def test_phase_transition(profile: Profile, seed: int) -> bool:
    """Survival just below e_0(0.4), extinction just above it."""
    e0 = critical_alpha(POISSON, 0, 0.4)
    below = estimate_extinction_probability(CtpParams(0, 0.4, e0 - 0.05, POISSON), 60, profile.phase_trials,
                                            mix64(seed, 0))
    above = estimate_extinction_probability(CtpParams(0, 0.4, e0 + 0.05, POISSON), 60, profile.phase_trials,
                                            mix64(seed, 1))
    survival = 1.0 - below.value
    return all([
        _check(survival >= 0.05, f"survival at alpha = e_0 - 0.05 = {e0 - 0.05:.4f}: {survival:.4f}"),
        _check(above.value >= 0.99, f"extinction at alpha = e_0 + 0.05 = {e0 + 0.05:.4f}: {above.value:.4f}"),
    ])


def test_growth_rate(profile: Profile, seed: int) -> bool:
    """Regression slope of ln Z^CT against theta."""
    results = []
    for index, (alpha, tolerance) in enumerate(((0.2, 0.05), (0.0, 0.03))):
        params = CtpParams(1, 0.4, alpha, POISSON)
        theta = malthusian_theta(params)
        estimate = estimate_growth_rate(params, 30, profile.growth_trials, 10, mix64(seed, index))
        results.append(_check(estimate.trials >= profile.min_survivors,
                              f"alpha={alpha}: {estimate.trials} surviving runs"))
        results.append(_check(abs(estimate.value - theta) <= tolerance,
                              f"alpha={alpha}: slope {estimate.value:.4f} vs theta {theta:.4f} (±{tolerance})"))
    return all(results)


def test_bound_suite(profile: Profile, seed: int) -> bool:
    """Analytic sandwiches on e_b(p)."""
    lam = POISSON.mean
    grid = np.linspace(0.0, 1.0, profile.grid_points + 2)[1:-1]
    slack = 4 * DEFAULT_TOL
    upper_ok, lower_ok, p1_ok = True, True, True
    for p in grid:
        e0 = critical_alpha(POISSON, 0, p)
        upper_ok &= e0 <= 1.0 - p / lam + slack
        if lam * (1.0 - p) > 1.0:
            lower_ok &= e0 >= 1.0 - 1.0 / (lam * (1.0 - p)) - slack
        for b in (1, 2, 3):
            p1_ok &= critical_alpha(POISSON, b, p) >= alpha_crit_p1(lam, b) - slack
    results = [
        _check(bool(upper_ok), f"e_0(p) <= 1 - p/lam on {len(grid)} points"),
        _check(bool(lower_ok), "e_0(p) >= 1 - 1/(lam(1-p)) where lam(1-p) > 1"),
        _check(bool(p1_ok), "e_b(p) >= alpha_crit_p1(lam, b) for b = 1, 2, 3"),
    ]
    bs = np.arange(4, 10)
    for p in (0.5, 1.0):
        gaps = np.array([1.0 - critical_alpha(POISSON, int(b), p) for b in bs])
        scaled = lam ** bs * gaps
        slope = np.polyfit(bs, np.log(gaps), 1)[0]
        results.append(_check(bool(np.all(scaled > 0.0) and np.all(scaled <= 2.0 + 1e-6)),
                              f"p={p}: lam^b (1 - e_b) in (0, 2] for b = 4..9 ({scaled.min():.3f}..{scaled.max():.3f})"))
        results.append(_check(abs(slope + math.log(lam)) <= 0.15,
                              f"p={p}: slope of log(1 - e_b) in b = {slope:.4f} (-ln lam = {-math.log(lam):.4f})"))
    return all(results)


def test_tail_bounds(profile: Profile, seed: int) -> bool:
    """Geometric tail of h, its sum bound, and the g fixed point."""
    geometric, summed, fixed = True, True, True
    for p in np.round(np.arange(0.1, 1.0, 0.1), 10):
        for alpha in (0.2, 0.5, 0.9):
            params = CtpParams(0, float(p), alpha, POISSON)
            seq = compute_sequences(params, 200)
            n = np.arange(1, seq.n_max + 1)
            geometric &= bool(np.all(seq.h[1:] <= c1(p) * (1.0 - p) ** n * (1.0 + 1e-12)))
            summed &= float(np.sum(seq.w)) <= 1.0 / (math.e * p * math.log(1.0 / (1.0 - p))) + 1e-12
            point = g_fixed_point(params)
            fixed &= point.residual <= 1e-10 and point.slope < 1.0
    return all([
        _check(geometric, "h_n(1-p) <= c1(p)(1-p)^n for p = 0.1..0.9"),
        _check(summed, "sum of h_n(1-p) below 1/(e p log(1/(1-p)))"),
        _check(fixed, "g fixed point residual <= 1e-10 with contraction slope < 1"),
    ])


def test_near_critical(profile: Profile, seed: int) -> bool:
    """e_0(p)/sqrt(p0 - p) as p rises to p0; which candidate limit it approaches."""
    offsets = (0.04, 0.02, 0.01, 0.005)
    ratios = near_critical_ratios(POISSON, offsets)
    candidates = near_critical_candidates(POISSON)
    diffs = np.abs(np.diff(ratios))
    nearest = min(candidates, key=lambda c: abs(ratios[-1] - c))
    label = "ratio" if nearest == candidates[0] else "square root"
    print(f"   p0 = {p0(POISSON):.4f}; ratios {', '.join(f'{r:.5f}' for r in ratios)}")
    return all([
        _check(bool(np.all(diffs[1:] < diffs[:-1])), "successive differences shrink"),
        _check(abs(ratios[-1] - nearest) <= 0.1 * nearest,
               f"limit nearest the {label} candidate {nearest:.5f} (candidates {candidates[0]:.5f}, {candidates[1]:.5f})"),
    ])


def test_monotone_coupling(profile: Profile, seed: int) -> bool:
    """Alive sets shrink when p and alpha both grow by 0.2 under shared uniforms."""
    results = []
    for b, p, alpha in ((0, 0.2, 0.3), (1, 0.3, 0.4), (2, 0.4, 0.2)):
        low = CtpParams(b, p, alpha, POISSON)
        high = CtpParams(b, p + 0.2, alpha + 0.2, POISSON)
        ok = True
        for i in range(profile.coupling_trials):
            trial_seed = mix64(seed, i)
            pairs = zip(sim_direct.alive_sets(high, 6, trial_seed), sim_direct.alive_sets(low, 6, trial_seed))
            ok &= all(strong <= weak for strong, weak in pairs)
        results.append(_check(ok, f"b={b}: ({p}, {alpha}) vs ({p + 0.2:.1f}, {alpha + 0.2:.1f}) over "
                                  f"{profile.coupling_trials} coupled trials"))
    return all(results)


SUITES: List[Tuple[str, Callable[[Profile, int], bool]]] = [
    ("Closed-form criticals", test_closed_form_criticals),
    ("Seed mean vs simulation", test_seed_mean_simulation),
    ("Oracle equivalence", test_oracle_equivalence),
    ("Simulator equivalence", test_simulator_equivalence),
    ("Phase transition", test_phase_transition),
    ("Growth rate", test_growth_rate),
    ("Bound suite", test_bound_suite),
    ("Tail bounds", test_tail_bounds),
    ("Near-critical exponent", test_near_critical),
    ("Monotone coupling", test_monotone_coupling),
]


def run_validation(profile_name: str = "full", seed: int = None, only: List[str] = None) -> Dict[str, bool]:
    """Run the suites of a profile; returns suite name -> passed."""
    profile = PROFILES[profile_name]
    seed = master_seed() if seed is None else seed
    print(f"🧪 Contact-tracing validation ({profile.name} profile, seed {seed})")
    print("=" * 50)

    results = {}
    for name, suite in SUITES:
        if only and name not in only:
            continue
        print(f"\n▶ {name}")
        try:
            results[name] = suite(profile, seed)
        except Exception as e:
            logger.error(f"{name} suite raised: {e}")
            print(f"❌ {name} suite failed with exception: {e}")
            results[name] = False
        logger.info(f"{name}: {'pass' if results[name] else 'fail'}")

    print("\n" + "=" * 50)
    print("📋 Validation Summary")
    print("=" * 50)
    for name, passed in results.items():
        print(f"{'✅ PASS' if passed else '❌ FAIL'} {name}")
    passed = sum(results.values())
    print(f"\n📊 Overall: {passed}/{len(results)} suites passed")
    return results
