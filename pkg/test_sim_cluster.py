import math

import numpy as np
import pytest

import sim_cluster
import sim_direct
from analytics import CtpParams, compute_sequences, f_b, malthusian_theta, seed_mean
from config import GROWTH_POPULATION_CAP
from montecarlo import chi_square_two_sample
from offspring import DomainError, FinitePmf, Poisson
from sim_cluster import ClusterRecord
from streams import mix64, trial_rng
from trajectory import ExplosionCapError

POISSON = Poisson(2.5)
DOUBLING = FinitePmf((0.0, 0.0, 1.0))
SEED = 424242


def params(b, p, alpha, dist=POISSON):
    return CtpParams(b, p, alpha, dist)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def within(estimate, stderr, expected, sigmas=4.5):
    return abs(estimate - expected) <= sigmas * stderr + 1e-12


class TestTruncation:
    def test_members_dropped_seeds_kept_at_removal_age(self):
        record = ClusterRecord(vt=[1, 2, 3, 4], vu=[0, 1, 1, 1], detection_age=1)
        assert record.truncated_vt(1) == [1, 2, 0, 0]
        assert record.truncated_vu(1) == [0, 1, 1, 0]
        assert record.total_seeds(1) == 2

    def test_undetected_record_untouched(self):
        record = ClusterRecord(vt=[1, 2, 0], vu=[0, 3, 1])
        assert record.truncated_vt(2) == [1, 2, 0]
        assert record.total_seeds(2) == 4

    def test_advance_stops_at_removal_age(self, rng):
        point = params(2, 1.0, 1.0, DOUBLING)
        record = sim_cluster.new_cluster(point, 0, rng)
        assert record.detection_age == 0 and not record.finished
        sim_cluster.advance_cluster(record, point, rng)
        assert record.vt == [1, 2] and not record.finished
        sim_cluster.advance_cluster(record, point, rng)
        assert record.vt == [1, 2, 4] and record.finished
        assert record.truncated_vt(2) == [1, 2, 0]
        with pytest.raises(ValueError):
            sim_cluster.advance_cluster(record, point, rng)

    def test_seeds_emitted_at_removal_age(self, rng):
        point = params(1, 1.0, 0.0, DOUBLING)
        total, per_generation = sim_cluster.sample_seed_offspring(point, rng)
        assert per_generation == [0, 2]
        assert total == 2

    def test_detected_seed_with_no_delay_emits_nothing(self, rng):
        point = params(0, 1.0, 0.5)
        assert sim_cluster.new_cluster(point, 0, rng).finished
        assert sim_cluster.sample_seed_offspring(point, rng) == (0, [0])

    def test_no_tracing_has_no_members_after_birth(self, rng):
        point = params(1, 0.4, 0.0)
        for _ in range(50):
            record = sim_cluster.new_cluster(point, 0, rng)
            while not record.finished:
                sim_cluster.advance_cluster(record, point, rng)
            assert all(v == 0 for v in record.vt[1:])

    def test_requires_detection(self, rng):
        with pytest.raises(DomainError):
            sim_cluster.sample_seed_offspring(params(1, 0.0, 0.5), rng)
        with pytest.raises(DomainError):
            sim_cluster.sample_seed_offspring_batch(params(1, 0.0, 0.5), 10, rng)


class TestSeedOffspring:
    def test_p_one_matches_f_b(self, rng):
        batch = sim_cluster.sample_seed_offspring_batch(params(1, 1.0, 0.3), 200_000, rng)
        stderr = batch.totals.std() / math.sqrt(batch.count)
        assert within(batch.totals.mean(), stderr, f_b(2.5, 1, 0.3))
        assert f_b(2.5, 1, 0.3) == pytest.approx(1.75)

    @pytest.mark.parametrize("point", [params(0, 0.4, 0.6), params(2, 0.4, 0.3), params(1, 0.4, 0.7, FinitePmf((0.2, 0.3, 0.5)))])
    def test_batch_mean_matches_seed_mean(self, point, rng):
        batch = sim_cluster.sample_seed_offspring_batch(point, 100_000, rng)
        stderr = batch.totals.std() / math.sqrt(batch.count)
        assert within(batch.totals.mean(), stderr, seed_mean(point))

    def test_scalar_sampler_matches_seed_mean(self, rng):
        point = params(1, 0.5, 0.5)
        totals = np.array([sim_cluster.sample_seed_offspring(point, rng)[0] for _ in range(20_000)])
        assert within(totals.mean(), totals.std() / math.sqrt(len(totals)), seed_mean(point))

    def test_per_age_means_match_v(self, rng):
        point = params(1, 0.4, 0.5)
        count = 200_000
        batch = sim_cluster.sample_seed_offspring_batch(point, count, rng)
        v = compute_sequences(point, 8).v
        for n in range(1, min(9, len(batch.vu_sum))):
            mean = batch.vu_sum[n] / count
            stderr = math.sqrt(max(batch.vu_sumsq[n] / count - mean ** 2, 0.0) / count)
            assert within(mean, stderr, v[n])

    def test_independent_clusters_uncorrelated(self, rng):
        batch = sim_cluster.sample_seed_offspring_batch(params(1, 0.4, 0.5), 100_000, rng)
        first, second = batch.totals[0::2].astype(float), batch.totals[1::2].astype(float)
        correlation = np.corrcoef(first, second)[0, 1]
        assert abs(correlation) < 4.5 / math.sqrt(len(first))


class TestRun:
    def test_detected_root_with_no_delay(self):
        for i in range(10):
            assert sim_cluster.run(params(0, 1.0, 0.4), 3, trial_rng(SEED, i)).zct[0] == 0

    def test_extinction_is_absorbing(self):
        for i in range(30):
            trajectory = sim_cluster.run(params(1, 0.5, 0.6), 15, trial_rng(SEED, i))
            assert trajectory.generations == 16
            assert trajectory.r0[0] == 1
            assert all(z is None for z in trajectory.z)
            if trajectory.extinct:
                assert all(v == 0 for v in trajectory.zct[trajectory.extinction_time:])

    def test_deterministic_doubling(self):
        trajectory = sim_cluster.run(params(1, 0.0, 0.0, DOUBLING), 5, trial_rng(SEED, 0))
        assert trajectory.zct == [1, 2, 4, 8, 16, 32]
        assert trajectory.r0 == [1, 2, 4, 8, 16, 32]

    def test_explosion_cap(self):
        with pytest.raises(ExplosionCapError) as info:
            sim_cluster.run(params(1, 0.0, 0.5, DOUBLING), 20, trial_rng(SEED, 0), cap=100)
        assert info.value.trajectory.capped
        assert info.value.trajectory.zct[:7] == [1, 2, 4, 8, 16, 32, 64]

    def test_no_tracing_is_plain_branching(self):
        trials = 3000
        traced = [sim_cluster.run(params(1, 0.5, 0.0), 3, trial_rng(SEED, i)).zct[3] for i in range(trials)]
        plain = [sim_cluster.run(params(1, 0.0, 0.0), 3, trial_rng(SEED + 1, i)).zct[3] for i in range(trials)]
        assert chi_square_two_sample(traced, plain)[1] > 0.001

    @pytest.mark.parametrize("point", [params(0, 0.4, 0.3), params(1, 1.0, 0.7), params(2, 0.4, 0.7)])
    def test_same_law_as_genealogy_simulator(self, point):
        trials = 2000
        direct = [sim_direct.run(point, 3, mix64(SEED, i)).zct[3] for i in range(trials)]
        cluster = [sim_cluster.run(point, 3, trial_rng(SEED, i)).zct[3] for i in range(trials)]
        assert chi_square_two_sample(direct, cluster)[1] > 0.001

    def test_seed_births_grow_at_malthusian_rate(self):
        point = params(1, 0.4, 0.2)
        theta = malthusian_theta(point)
        start, slopes = 8, []
        for i in range(200):
            try:
                trajectory = sim_cluster.run(point, 20, trial_rng(SEED, i), cap=GROWTH_POPULATION_CAP)
            except ExplosionCapError as e:
                trajectory = e.trajectory
            born = np.asarray(trajectory.r0[start:], dtype=float)
            if trajectory.extinct or born.size < 3 or np.any(born == 0):
                continue
            slopes.append(np.polyfit(np.arange(start, start + born.size), np.log(born), 1)[0])
        assert len(slopes) >= 50
        assert abs(np.mean(slopes) - theta) <= 0.05


class TestSeedProcess:
    def test_schedule_starts_with_root(self, rng):
        path = sim_cluster.run_seed_process(params(1, 0.4, 0.5), 6, rng)
        assert path.schedules[0] == {0: 1}
        assert len(path.schedules) == 7
        assert all(k >= 0 for schedule in path.schedules for k in schedule)

    def test_seed_counts_match_mean_growth(self):
        point = params(1, 1.0, 0.3)
        trials = 2000
        r1 = [sim_cluster.run_seed_process(point, 1, trial_rng(SEED, i)).r0()[1] for i in range(trials)]
        assert within(np.mean(r1), np.std(r1) / math.sqrt(trials), 1.75)

    def test_cap(self, rng):
        with pytest.raises(ExplosionCapError):
            sim_cluster.run_seed_process(params(1, 1.0, 0.0, DOUBLING), 30, rng, cap=100)
