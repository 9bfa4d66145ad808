import math

import numpy as np
import pytest

from analytics import (CtpParams, NoCertifiedTruncationError, ThetaUndefinedError, Verdict, alpha_crit_p1,
                       alpha_one_minus_bound, c1, check_eigenvector, classify_extinction, compute_sequences,
                       critical_alpha, eb_bounds, f_b, g_fixed_point, h1_closed_form, malthusian_theta,
                       near_critical_candidates, near_critical_ratios, p0, seed_mean, seed_mean_with_bound,
                       survival_sufficient_2crit, survival_sufficient_easy)
from offspring import DomainError, FinitePmf, Geometric, Poisson

POISSON = Poisson(2.5)
E2_P1 = (3.75 + math.sqrt(3.75 ** 2 + 4 * 6.25 * 1.5)) / 12.5


def params(b, p, alpha, dist=POISSON):
    return CtpParams(b, p, alpha, dist)


class TestParams:
    def test_derived_rates(self):
        point = params(2, 0.4, 0.2)
        assert point.lam_t == pytest.approx(0.5)
        assert point.lam_u == pytest.approx(2.0)
        assert point.s == pytest.approx(0.6)
        assert point.with_alpha(0.7).alpha == 0.7

    @pytest.mark.parametrize("b, p, alpha", [(-1, 0.5, 0.5), (1.5, 0.5, 0.5), (1, 1.1, 0.5), (1, 0.5, -0.1)])
    def test_outside_parameter_space(self, b, p, alpha):
        with pytest.raises(DomainError):
            params(b, p, alpha)


class TestSequences:
    def test_first_terms(self):
        seq = compute_sequences(params(0, 0.4, 0.5), 10)
        assert seq.g[0] == seq.h[0] == pytest.approx(0.6)
        assert seq.g[1] == pytest.approx(0.6 * math.exp(-0.5))
        assert seq.g[1] == pytest.approx(0.363918, abs=1e-6)
        assert seq.h[1] == pytest.approx(0.272939, abs=1e-6)
        assert seq.h[1] == pytest.approx(h1_closed_form(params(0, 0.4, 0.5)))
        assert np.array_equal(seq.w, seq.h)

    def test_v_prefix_then_h(self):
        seq = compute_sequences(params(2, 0.4, 0.5), 10)
        assert seq.v[0] == 0.0
        assert seq.v[1] == pytest.approx(1.25)
        assert seq.v[2] == pytest.approx(1.5625)
        assert seq.v[3] == pytest.approx(1.171875)
        assert seq.v[4] == pytest.approx(1.25 * 1.5625 * seq.h[1])

    def test_g_strictly_decreasing(self):
        seq = compute_sequences(params(1, 0.3, 0.6), 40)
        assert np.all(np.diff(seq.g) < 0)

    @pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_geometric_tail_and_sum_bound(self, p):
        seq = compute_sequences(params(0, p, 0.5), 200)
        n = np.arange(1, seq.n_max + 1)
        assert np.all(seq.h[1:] <= c1(p) * (1 - p) ** n * (1 + 1e-12))
        assert seq.h.sum() <= 1.0 / (math.e * p * math.log(1.0 / (1.0 - p))) + 1e-12

    def test_tail_bound_covers_omitted_terms(self):
        point = params(1, 0.3, 0.5)
        short = compute_sequences(point, 20)
        long = compute_sequences(point, 400)
        omitted = long.v[21:].sum()
        assert omitted <= short.tail_bound
        assert long.h[21:].sum() <= short.h_tail_bound
        assert long.tail_bound < 1e-12

    def test_p_one_has_zero_tail(self):
        seq = compute_sequences(params(2, 1.0, 0.5), 10)
        assert np.all(seq.h == 0.0)
        assert seq.tail_bound == 0.0
        assert seq.v[1:3].tolist() == pytest.approx([1.25, 1.5625])

    def test_p_zero_rejected(self):
        with pytest.raises(NoCertifiedTruncationError):
            compute_sequences(params(1, 0.0, 0.5), 10)
        with pytest.raises(NoCertifiedTruncationError):
            seed_mean(params(1, 0.0, 0.5))

    def test_fixed_point(self):
        point = g_fixed_point(params(0, 0.3, 0.6))
        assert point.residual <= 1e-10
        assert point.slope < 1.0


class TestSeedMean:
    def test_p_one_equals_f_b(self):
        assert seed_mean(params(1, 1.0, 0.3)) == pytest.approx(1.75)
        assert seed_mean(params(3, 1.0, 0.3)) == pytest.approx(f_b(2.5, 3, 0.3))

    def test_full_tracing_gives_zero(self):
        assert seed_mean(params(1, 0.4, 1.0)) == 0.0

    def test_certified_bound(self):
        value, bound = seed_mean_with_bound(params(0, 0.4, 0.6), 1e-10)
        assert bound < 1e-10
        reference = compute_sequences(params(0, 0.4, 0.6), 2000).v.sum()
        assert value == pytest.approx(reference, abs=1e-10)


class TestClassify:
    def test_detected_subprocess_subcritical(self):
        verdict = classify_extinction(params(0, 0.6, 0.1), 1e-10)
        assert verdict.verdict is Verdict.EXTINCT

    def test_no_tracing_survives(self):
        verdict = classify_extinction(params(3, 0.5, 0.0), 1e-10)
        assert verdict.verdict is Verdict.SURVIVES
        assert verdict.verdict.value == "SurvivesWPP"

    def test_no_detection(self):
        assert classify_extinction(params(1, 0.0, 0.5)).verdict is Verdict.SURVIVES
        subcritical = classify_extinction(params(1, 0.0, 0.5, FinitePmf((0.5, 0.5))))
        assert subcritical.extinct and subcritical.rule == "subcritical base"

    def test_full_tracing_extinct(self):
        assert classify_extinction(params(4, 0.01, 1.0)).extinct

    def test_p_one_crossing(self):
        assert not classify_extinction(params(1, 1.0, 0.59)).extinct
        assert classify_extinction(params(1, 1.0, 0.61)).extinct

    def test_critical_case_is_extinct(self):
        verdict = classify_extinction(params(1, 1.0, 0.6))
        assert verdict.extinct
        assert verdict.rule == "critical-within-tol"

    @pytest.mark.parametrize("b", [1, 2])
    def test_agrees_with_f_b_at_p_one(self, b):
        for alpha in np.linspace(0.0, 1.0, 101):
            extinct = classify_extinction(params(b, 1.0, float(alpha))).extinct
            assert extinct == (f_b(2.5, b, float(alpha)) <= 1.0 + 1e-10)


class TestTheta:
    def test_no_tracing_gives_log_lambda(self):
        assert malthusian_theta(params(1, 0.4, 0.0)) == pytest.approx(math.log(2.5), abs=1e-9)

    def test_critical_gives_zero(self):
        assert malthusian_theta(params(1, 1.0, 0.6)) == 0.0

    def test_p_one_quadratic(self):
        x = (-1.25 + math.sqrt(1.25 ** 2 + 4 * 1.5625)) / (2 * 1.5625)
        assert malthusian_theta(params(2, 1.0, 0.5)) == pytest.approx(-math.log(x), abs=1e-9)

    def test_root_of_transform(self):
        point = params(1, 0.4, 0.2)
        theta = malthusian_theta(point)
        v = compute_sequences(point, 400).v
        n = np.arange(len(v))
        assert theta > 0
        assert np.sum(v * np.exp(-n * theta)) == pytest.approx(1.0, abs=1e-8)
        assert check_eigenvector(point, theta, 200) < 1e-8

    def test_sign_follows_seed_mean(self):
        for alpha in (0.1, 0.3, 0.5, 0.7):
            point = params(0, 0.3, alpha)
            y = seed_mean(point)
            try:
                theta = malthusian_theta(point)
            except ThetaUndefinedError:
                assert y < 1
                continue
            assert (theta > 0) == (y > 1)

    def test_undefined_when_no_seeds(self):
        with pytest.raises(ThetaUndefinedError):
            malthusian_theta(params(0, 1.0, 0.5))


class TestCriticalCurve:
    def test_closed_forms_at_p_one(self):
        assert critical_alpha(POISSON, 1, 1.0) == pytest.approx(0.6, abs=1e-10)
        assert critical_alpha(POISSON, 2, 1.0) == pytest.approx(E2_P1, abs=1e-9)
        assert E2_P1 == pytest.approx(0.874456, abs=1e-6)

    def test_f_b_and_alpha_crit(self):
        assert f_b(2.5, 1, 0.0) == 2.5
        assert f_b(2.5, 1, 1.0) == 0.0
        assert alpha_crit_p1(2.5, 1) == pytest.approx(0.6, abs=1e-10)
        assert alpha_crit_p1(2.5, 2) == pytest.approx(E2_P1, abs=1e-9)
        with pytest.raises(DomainError):
            f_b(2.5, 0, 0.5)
        with pytest.raises(DomainError):
            alpha_crit_p1(0.9, 1)

    def test_within_analytic_sandwich(self):
        lower, upper = eb_bounds(POISSON, 0, 0.2)
        assert (lower, upper) == pytest.approx((0.5, 0.92))
        assert lower <= critical_alpha(POISSON, 0, 0.2) <= upper

    def test_bounds_edge_cases(self):
        assert eb_bounds(POISSON, 0, 1.0) == pytest.approx((0.0, 0.6))
        assert eb_bounds(POISSON, 1, 0.5)[0] >= 0.6
        assert alpha_one_minus_bound(2.5, 3) == pytest.approx(1 - 2 / 2.5 ** 3)
        assert alpha_one_minus_bound(2.5, 2) is None

    def test_boundary_is_sharp(self):
        tol = 1e-8
        alpha = critical_alpha(POISSON, 1, 0.4, tol)
        assert 0 < alpha < 1
        assert classify_extinction(params(1, 0.4, alpha + 2 * tol), tol).extinct
        assert not classify_extinction(params(1, 0.4, alpha - 2 * tol), tol).extinct

    def test_monotone_in_p_and_b(self):
        grid = [0.2, 0.4, 0.6, 0.8, 1.0]
        table = np.array([[critical_alpha(POISSON, b, p, 1e-8) for p in grid] for b in range(4)])
        assert np.all(np.diff(table, axis=1) <= 1e-7)
        assert np.all(np.diff(table, axis=0) >= -1e-7)

    def test_no_detection_warns(self):
        with pytest.warns(RuntimeWarning):
            assert critical_alpha(POISSON, 1, 0.0) == 1.0

    def test_other_offspring_law(self):
        dist = Geometric(0.3)
        alpha = critical_alpha(dist, 1, 0.5, 1e-8)
        lower, upper = eb_bounds(dist, 1, 0.5)
        assert lower - 1e-8 <= alpha <= upper


class TestSufficientConditions:
    def test_two_term_condition(self):
        assert survival_sufficient_2crit(POISSON, 0.3, 0.2)
        assert not survival_sufficient_2crit(POISSON, 1.0, 0.2)
        for p in (0.3, 0.5, 0.7):
            assert survival_sufficient_2crit(POISSON, p, 0.0) == (2.5 * (1 - p) > 1)

    def test_easy_condition_implies_survival(self):
        point = params(0, 0.2, 0.3)
        assert survival_sufficient_easy(point)
        assert not classify_extinction(point).extinct


def test_near_critical_limit_is_the_square_root():
    ratio, root = near_critical_candidates(POISSON)
    assert p0(POISSON) == pytest.approx(0.6)
    assert ratio == pytest.approx(5.0 / 3.0)
    assert root == pytest.approx(math.sqrt(5.0 / 3.0))
    values = near_critical_ratios(POISSON, (0.04, 0.02, 0.01, 0.005))
    diffs = np.abs(np.diff(values))
    assert np.all(diffs[1:] < diffs[:-1])
    assert abs(values[-1] - root) <= 0.1 * root
    assert abs(values[-1] - root) < abs(values[-1] - ratio)
