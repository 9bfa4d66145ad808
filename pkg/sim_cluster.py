#!/usr/bin/env python3
"""
Cluster-level simulator.

A traceable cluster grows as a branching process with mean lam*alpha; its
members are tested on arrival, the first age S with a detected member fixes
the removal age S+b, and every untraceable child it emits up to and including
age S+b opens a new cluster. Members at age S+b are not retained while seeds
emitted at that age are.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from analytics import CtpParams
from config import CLUSTER_AGE_CAP, GROWTH_POPULATION_CAP, POPULATION_CAP
from offspring import DomainError
from trajectory import ExplosionCapError, Trajectory

logger = logging.getLogger(__name__)

NO_REMOVAL = -1


class ClusterAgeCapError(RuntimeError):
    """A truncated cluster outlived the age cap."""


@dataclass
class ClusterRecord:
    """V^T_n and V^U_n by cluster age, with the detection age S once known."""

    birth_generation: int = 0
    vt: List[int] = field(default_factory=lambda: [1])
    vu: List[int] = field(default_factory=lambda: [0])
    detection_age: Optional[int] = None
    finished: bool = False

    @property
    def age(self) -> int:
        return len(self.vt) - 1

    def removal_age(self, b: int) -> Optional[int]:
        return None if self.detection_age is None else self.detection_age + b

    def truncated_vt(self, b: int) -> List[int]:
        end = self.removal_age(b)
        return [x if end is None or n <= end - 1 else 0 for n, x in enumerate(self.vt)]

    def truncated_vu(self, b: int) -> List[int]:
        end = self.removal_age(b)
        return [x if end is None or n <= end else 0 for n, x in enumerate(self.vu)]

    def total_seeds(self, b: int) -> int:
        return sum(self.truncated_vu(b))


def new_cluster(params: CtpParams, birth_generation: int, rng: np.random.Generator) -> ClusterRecord:
    """A fresh cluster: the seed alone, tested for detection at birth."""
    record = ClusterRecord(birth_generation=birth_generation)
    if rng.random() < params.p:
        record.detection_age = 0
        record.finished = params.b == 0
    return record


def advance_cluster(record: ClusterRecord, params: CtpParams, rng: np.random.Generator) -> ClusterRecord:
    """One generation of cluster growth, with detection of the new members."""
    if record.finished:
        raise ValueError("cluster already terminated")
    age = record.age + 1
    if age > CLUSTER_AGE_CAP:
        raise ClusterAgeCapError(f"cluster reached age {age} (cap {CLUSTER_AGE_CAP})")

    total = int(params.dist.sample_sum(rng, np.array([record.vt[-1]]))[0])
    traced = int(rng.binomial(total, params.alpha))
    record.vt.append(traced)
    record.vu.append(total - traced)

    if record.detection_age is None and traced > 0 and rng.binomial(traced, params.p) > 0:
        record.detection_age = age
    end = record.removal_age(params.b)
    record.finished = traced == 0 or (end is not None and age >= end)
    return record


def sample_seed_offspring(params: CtpParams, rng: np.random.Generator) -> Tuple[int, List[int]]:
    """Total seeds of one truncated cluster and the per-age counts (index n holds age n; index 0 is 0)."""
    if params.p <= 0.0:
        raise DomainError("seed offspring is only finite a.s. for p > 0")
    record = new_cluster(params, 0, rng)
    while not record.finished:
        advance_cluster(record, params, rng)
    per_generation = record.truncated_vu(params.b)
    return sum(per_generation), per_generation


@dataclass
class SeedOffspringBatch:
    """Outputs of `count` independent truncated clusters.

    totals[i] is cluster i's seed total; vu_sum[n] and vu_sumsq[n] are the sum
    and sum of squares over clusters of the seeds emitted at age n.
    """

    count: int
    totals: np.ndarray
    vu_sum: np.ndarray
    vu_sumsq: np.ndarray


def sample_seed_offspring_batch(params: CtpParams, count: int, rng: np.random.Generator) -> SeedOffspringBatch:
    """Vectorised sample_seed_offspring over `count` clusters born together."""
    if params.p <= 0.0:
        raise DomainError("seed offspring is only finite a.s. for p > 0")
    b, alpha, p, dist = params.b, params.alpha, params.p, params.dist

    totals = np.zeros(count, dtype=np.int64)
    vt = np.ones(count, dtype=np.int64)
    removal = np.where(rng.random(count) < p, b, NO_REMOVAL)
    active = np.flatnonzero(~((removal == 0) & (b == 0)))
    vu_sum, vu_sumsq = [0.0], [0.0]

    age = 0
    while active.size:
        age += 1
        if age > CLUSTER_AGE_CAP:
            raise ClusterAgeCapError(f"{active.size} clusters still alive at age {age}")
        children = dist.sample_sum(rng, vt[active])
        traced = rng.binomial(children, alpha)
        untraced = children - traced
        totals[active] += untraced
        vu_sum.append(float(untraced.sum()))
        vu_sumsq.append(float(np.square(untraced, dtype=np.float64).sum()))

        vt[active] = traced
        hit = (removal[active] == NO_REMOVAL) & (rng.binomial(traced, p) > 0)
        removal[active[hit]] = age + b
        cluster_removal = removal[active]
        done = (traced == 0) | ((cluster_removal != NO_REMOVAL) & (age >= cluster_removal))
        active = active[~done]

    return SeedOffspringBatch(count=count, totals=totals,
                              vu_sum=np.asarray(vu_sum), vu_sumsq=np.asarray(vu_sumsq))


@dataclass
class ClusterSimState:
    """Active clusters as parallel arrays: size at current age, age, removal age (-1 if undetected)."""

    current_time: int = 0
    vt: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    age: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    removal: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    birth_generation: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    trajectory: Trajectory = field(default_factory=Trajectory)

    @property
    def active_clusters(self) -> int:
        return int(self.vt.size)

    @property
    def zct(self) -> int:
        return int(self.vt.sum())


def _open_clusters(state: ClusterSimState, params: CtpParams, seeds: int, rng: np.random.Generator):
    """Seeds born now become clusters of size 1; with b = 0 detected seeds leave at once."""
    if seeds == 0:
        return
    removal = np.where(rng.random(seeds) < params.p, params.b, NO_REMOVAL)
    keep = ~((removal == 0) & (params.b == 0))
    kept = int(keep.sum())
    state.vt = np.concatenate([state.vt, np.ones(kept, dtype=np.int64)])
    state.age = np.concatenate([state.age, np.zeros(kept, dtype=np.int64)])
    state.removal = np.concatenate([state.removal, removal[keep]])
    state.birth_generation = np.concatenate(
        [state.birth_generation, np.full(kept, state.current_time, dtype=np.int64)])


def init_state(params: CtpParams, rng: np.random.Generator) -> ClusterSimState:
    state = ClusterSimState()
    _open_clusters(state, params, 1, rng)
    state.trajectory.record(None, state.zct, 1)
    return state


def step_state(state: ClusterSimState, params: CtpParams, rng: np.random.Generator,
               cap: int = POPULATION_CAP) -> ClusterSimState:
    """Advance every active cluster one generation, then open clusters for the seeds just born."""
    state.current_time += 1
    seeds = 0
    if state.active_clusters:
        children = params.dist.sample_sum(rng, state.vt)
        traced = rng.binomial(children, params.alpha)
        seeds = int((children - traced).sum())
        state.age += 1

        hit = (state.removal == NO_REMOVAL) & (rng.binomial(traced, params.p) > 0)
        state.removal[hit] = state.age[hit] + params.b
        keep = (traced > 0) & ~((state.removal != NO_REMOVAL) & (state.age >= state.removal))

        state.vt = traced[keep]
        state.age = state.age[keep]
        state.removal = state.removal[keep]
        state.birth_generation = state.birth_generation[keep]

    _open_clusters(state, params, seeds, rng)
    state.trajectory.record(None, state.zct, seeds)
    if state.zct > cap:
        state.trajectory.capped = True
        raise ExplosionCapError(f"Z^CT = {state.zct} at generation {state.current_time} exceeds cap {cap}",
                                state.trajectory)
    return state


def run(params: CtpParams, horizon: int, rng: np.random.Generator, cap: int = POPULATION_CAP) -> Trajectory:
    """Trajectory (Z^CT_n and seeds born R_n(0)) over generations 0..horizon; Z is not tracked."""
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    state = init_state(params, rng)
    for _ in range(horizon):
        step_state(state, params, rng, cap)
    return state.trajectory


@dataclass
class SeedProcessPath:
    """Seed-level process: schedules[n] maps k -> R_n(k), seeds due k generations after n, seen at time n."""

    schedules: List[Dict[int, int]] = field(default_factory=list)
    capped: bool = False

    def r0(self) -> List[int]:
        return [schedule.get(0, 0) for schedule in self.schedules]


def run_seed_process(params: CtpParams, horizon: int, rng: np.random.Generator,
                     cap: int = GROWTH_POPULATION_CAP) -> SeedProcessPath:
    """Each seed, when born, draws its whole truncated-cluster emission schedule.

    R_n(k) is recorded before the seeds born at n are expanded.
    """
    if params.p <= 0.0:
        raise DomainError("the seed process needs p > 0")
    pending = {0: 1}
    path = SeedProcessPath()
    for n in range(horizon + 1):
        path.schedules.append({t - n: count for t, count in sorted(pending.items()) if count})
        born = pending.pop(n, 0)
        if born > cap:
            path.capped = True
            raise ExplosionCapError(f"{born} seeds born at generation {n} exceed cap {cap}", path)
        if born:
            batch = sample_seed_offspring_batch(params, born, rng)
            for age in range(1, len(batch.vu_sum)):
                emitted = int(batch.vu_sum[age])
                if emitted:
                    pending[n + age] = pending.get(n + age, 0) + emitted
    return path
