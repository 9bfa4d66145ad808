import math

import numpy as np
import pytest

import sim_direct
from analytics import CtpParams
from config import UNTREATED_CAP
from offspring import FinitePmf, Poisson
from streams import PathUniforms, mix64
from trajectory import ExplosionCapError

POISSON = Poisson(2.5)
SEED = 20240601


def params(b, p, alpha, dist=POISSON):
    return CtpParams(b, p, alpha, dist)


def test_root_alive_with_delay():
    for i in range(20):
        state = sim_direct.init(params(1, 0.9, 0.5), mix64(SEED, i))
        assert state.trajectory.zct[0] == 1
        assert state.current_generation() == {()}


def test_root_removed_when_detected_at_once():
    for i in range(20):
        assert sim_direct.init(params(0, 1.0, 0.5), mix64(SEED, i)).trajectory.zct[0] == 0


def test_root_detection_frequency():
    trials = 20000
    empty = sum(sim_direct.init(params(0, 0.5, 0.5), mix64(SEED, i)).trajectory.zct[0] == 0 for i in range(trials))
    stderr = math.sqrt(0.25 / trials)
    assert abs(empty / trials - 0.5) < 4 * stderr


@pytest.mark.parametrize("point", [params(1, 0.5, 0.0), params(3, 0.9, 0.0), params(0, 0.0, 0.6), params(2, 0.0, 0.9)])
def test_no_removal_from_current_generation(point):
    for i in range(10):
        trajectory = sim_direct.run(point, 7, mix64(SEED, i))
        assert trajectory.zct == trajectory.z


def test_full_tracing_dies_after_first_detection():
    point = params(1, 0.3, 1.0)
    for i in range(10):
        state = sim_direct.init(point, mix64(SEED, i))
        detected = False
        for _ in range(10):
            sim_direct.step(state, point)
            detected = detected or bool(state.last_detected)
            if detected:
                assert state.trajectory.zct[-1] == 0
                assert not state.vertices


def test_trajectory_properties():
    point = params(1, 0.3, 0.4)
    for i in range(20):
        trajectory = sim_direct.run(point, 8, mix64(SEED, i))
        assert trajectory.generations == 9
        assert trajectory.r0[0] == 1
        assert all(zct <= z for zct, z in zip(trajectory.zct, trajectory.z))
        if trajectory.extinct:
            assert all(v == 0 for v in trajectory.zct[trajectory.extinction_time:])


def test_clusters_partition_alive_vertices():
    point = params(1, 0.3, 0.5)
    for i in range(10):
        state = sim_direct.init(point, mix64(SEED, i))
        for _ in range(6):
            sim_direct.step(state, point)
            members = set()
            for cluster_id, paths in state.cluster_members.items():
                assert state.vertices[cluster_id].is_seed
                assert all(state.vertices[path].cluster_id == cluster_id for path in paths)
                members |= paths
            assert members == set(state.vertices)


def _brute_force_removed(alive, detected, uniforms, alpha):
    """Union of traceable components of the detected vertices, by graph search."""
    neighbours = {path: set() for path in alive}
    for path in alive:
        if path and path[:-1] in alive and uniforms.trace_uniform(path) < alpha:
            neighbours[path].add(path[:-1])
            neighbours[path[:-1]].add(path)
    removed, frontier = set(), list(detected)
    while frontier:
        path = frontier.pop()
        if path in removed:
            continue
        removed.add(path)
        frontier.extend(neighbours[path] - removed)
    return removed


def test_removal_matches_component_search():
    point = params(1, 0.4, 0.6, Poisson(1.5))
    checked = 0
    for i in range(200):
        state = sim_direct.init(point, mix64(SEED, i))
        for _ in range(4):
            before = set(state.vertices)
            sim_direct.step(state, point)
            alive = before | set(state.last_born)
            if len(alive) > 30:
                break
            expected = _brute_force_removed(alive, state.last_detected, state.uniforms, point.alpha)
            assert state.last_removed == expected
            checked += bool(expected)
    assert checked > 0


def test_coupled_alive_sets_shrink():
    low, high = params(1, 0.3, 0.4), params(1, 0.5, 0.6)
    for i in range(30):
        seed = mix64(SEED, i)
        for strong, weak in zip(sim_direct.alive_sets(high, 6, seed), sim_direct.alive_sets(low, 6, seed)):
            assert strong <= weak


def test_same_seed_same_trajectory():
    point = params(2, 0.4, 0.5)
    assert sim_direct.run(point, 6, 99).zct == sim_direct.run(point, 6, 99).zct
    assert sim_direct.run(point, 3, np.random.default_rng(1)).generations == 4


def test_explosion_cap_carries_trajectory():
    doubling = params(1, 0.0, 0.5, FinitePmf((0.0, 0.0, 1.0)))
    with pytest.raises(ExplosionCapError) as info:
        sim_direct.run(doubling, 20, SEED, cap=50)
    assert info.value.trajectory.capped
    assert info.value.trajectory.zct[:5] == [1, 2, 4, 8, 16]


def test_untreated_size_stops_at_its_own_cap():
    # root detected at birth: Z^CT is 0 while the untreated tree keeps doubling
    doubling = params(0, 1.0, 0.5, FinitePmf((0.0, 0.0, 1.0)))
    trajectory = sim_direct.run(doubling, 8, SEED, untreated_cap=20)
    assert trajectory.z == [1, 2, 4, 8, 16, None, None, None, None]
    assert trajectory.zct == [0] * 9
    assert not trajectory.capped


def test_untreated_cap_defaults_from_config():
    state = sim_direct.init(params(1, 0.3, 0.4), SEED)
    assert state.untreated_cap == UNTREATED_CAP
    assert sim_direct.init(params(1, 0.3, 0.4), SEED, untreated_cap=5).untreated_cap == 5


def test_path_uniforms_are_reproducible():
    uniforms = PathUniforms(7)
    assert uniforms.uniforms((0, 1)) == PathUniforms(7).uniforms((0, 1))
    assert uniforms.uniforms((0, 1)) != uniforms.uniforms((1, 0))
    assert all(0.0 <= u < 1.0 for u in uniforms.uniforms(()))


def test_seeds_counted_before_same_step_removal():
    doubling = params(0, 0.5, 0.0, FinitePmf((0.0, 0.0, 1.0)))
    removed_at_birth = False
    for i in range(40):
        trajectory = sim_direct.run(doubling, 1, mix64(SEED, i))
        if trajectory.zct[0] == 1:
            assert trajectory.r0[1] == 2
            removed_at_birth = removed_at_birth or trajectory.zct[1] < 2
    assert removed_at_birth
