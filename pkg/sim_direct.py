#!/usr/bin/env python3
"""
Reference simulator on the genealogical tree.

Vertices are Ulam-Harris paths (the root is the empty tuple, child i of x is
x + (i,)). Offspring counts, detection flags and trace flags are read from
hashed per-path uniforms, so two runs sharing a seed are coupled across
parameter settings: the alive sets shrink when p or alpha grow.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from analytics import CtpParams
from config import POPULATION_CAP, UNTREATED_CAP
from streams import PathUniforms
from trajectory import ExplosionCapError, Trajectory

logger = logging.getLogger(__name__)

Path = Tuple[int, ...]
ROOT: Path = ()


@dataclass
class Vertex:
    id: Path
    parent: Optional[Path]
    generation: int
    traceable: bool
    cluster_id: Path
    detected: Optional[bool] = None
    alive: bool = True

    @property
    def is_seed(self) -> bool:
        return not self.traceable


@dataclass
class GenealogyState:
    """Alive vertices indexed by generation and by traceable cluster."""

    uniforms: PathUniforms
    cap: int
    current_time: int = 0
    vertices: Dict[Path, Vertex] = field(default_factory=dict)
    live_by_generation: Dict[int, Set[Path]] = field(default_factory=dict)
    cluster_members: Dict[Path, Set[Path]] = field(default_factory=dict)
    untreated: Optional[List[Path]] = None
    untreated_cap: int = UNTREATED_CAP
    trajectory: Trajectory = field(default_factory=Trajectory)
    last_born: List[Path] = field(default_factory=list)
    last_detected: List[Path] = field(default_factory=list)
    last_removed: Set[Path] = field(default_factory=set)

    def pending_detection_generation(self, b: int) -> int:
        return self.current_time - b

    def add(self, vertex: Vertex):
        self.vertices[vertex.id] = vertex
        self.live_by_generation.setdefault(vertex.generation, set()).add(vertex.id)
        self.cluster_members.setdefault(vertex.cluster_id, set()).add(vertex.id)

    def remove_cluster(self, cluster_id: Path) -> Set[Path]:
        members = self.cluster_members.pop(cluster_id, set())
        for path in members:
            vertex = self.vertices.pop(path)
            vertex.alive = False
            self.live_by_generation[vertex.generation].discard(path)
        return members

    def current_generation(self) -> FrozenSet[Path]:
        return frozenset(self.live_by_generation.get(self.current_time, ()))


def _seed_from(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return int(rng)


def _offspring_count(state: GenealogyState, params: CtpParams, path: Path) -> int:
    return params.dist.quantile(state.uniforms.offspring_uniform(path))


def _expand_untreated(state: GenealogyState, params: CtpParams) -> Optional[List[Path]]:
    """Next generation of the untreated tree, or None as soon as it passes the untreated cap."""
    nxt: List[Path] = []
    for path in state.untreated:
        nxt.extend(path + (i,) for i in range(_offspring_count(state, params, path)))
        if len(nxt) > state.untreated_cap:
            return None
    return nxt


def _detect(state: GenealogyState, params: CtpParams, vertex: Vertex) -> bool:
    vertex.detected = state.uniforms.detection_uniform(vertex.id) < params.p
    return vertex.detected


def init(params: CtpParams, rng, cap: int = POPULATION_CAP,
         untreated_cap: int = UNTREATED_CAP) -> GenealogyState:
    """A_0 = {root}, or the empty set when b = 0 and the root is detected at once.

    `rng` is either an integer trial seed (coupled runs) or a Generator from
    which one is drawn. It is consumed here only: every later draw is a hash
    of that seed and a path, held in `state.uniforms`.
    """
    state = GenealogyState(uniforms=PathUniforms(_seed_from(rng)), cap=cap,
                           untreated=[ROOT], untreated_cap=untreated_cap)
    root = Vertex(id=ROOT, parent=None, generation=0, traceable=False, cluster_id=ROOT)
    state.add(root)
    state.last_born = [ROOT]
    if params.b == 0 and _detect(state, params, root):
        state.last_detected = [ROOT]
        state.last_removed = state.remove_cluster(ROOT)
    state.trajectory.record(1, len(state.current_generation()), 1)
    return state


def step(state: GenealogyState, params: CtpParams) -> GenealogyState:
    """Advance from time n-1 to n: spawn, test generation n-b, remove detected clusters.

    There is no rng argument: offspring counts, detection and trace flags all
    come from `state.uniforms`, fixed when `init` took the seed. The recorded
    seed count is the number of untraceable children born at n before any
    removal, so with b = 0 it includes seeds detected and removed in this
    same step. Z_n is recorded until the untreated generation passes
    `state.untreated_cap` and is None from then on.
    """
    n = state.current_time + 1
    alpha, b = params.alpha, params.b

    born, seeds = [], 0
    for path in sorted(state.live_by_generation.get(n - 1, ())):
        parent = state.vertices[path]
        for i in range(_offspring_count(state, params, path)):
            child = path + (i,)
            traceable = state.uniforms.trace_uniform(child) < alpha
            cluster = parent.cluster_id if traceable else child
            state.add(Vertex(id=child, parent=path, generation=n, traceable=traceable, cluster_id=cluster))
            born.append(child)
            seeds += not traceable
    state.current_time = n
    state.last_born = born

    z = None
    if state.untreated is not None:
        state.untreated = _expand_untreated(state, params)
        if state.untreated is None:
            logger.debug(f"untreated generation {n} passed {state.untreated_cap}; Z no longer tracked")
        else:
            z = len(state.untreated)

    if len(state.vertices) > state.cap:
        state.trajectory.capped = True
        raise ExplosionCapError(f"{len(state.vertices)} alive vertices at generation {n} exceed cap {state.cap}",
                                state.trajectory)

    detected, clusters = [], set()
    for path in sorted(state.live_by_generation.get(state.pending_detection_generation(b), ())):
        vertex = state.vertices[path]
        if _detect(state, params, vertex):
            detected.append(path)
            clusters.add(vertex.cluster_id)
    removed = set()
    for cluster_id in sorted(clusters):
        removed |= state.remove_cluster(cluster_id)
    state.last_detected = detected
    state.last_removed = removed

    state.trajectory.record(z, len(state.live_by_generation.get(n, ())), seeds)
    return state


def run(params: CtpParams, horizon: int, rng, cap: int = POPULATION_CAP,
        untreated_cap: int = UNTREATED_CAP) -> Trajectory:
    """Trajectory over generations 0..horizon.

    `rng` seeds the per-path uniforms once; `step` draws nothing else. The
    r0 column counts seeds at birth, before removal (see `step`).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    state = init(params, rng, cap, untreated_cap)
    for _ in range(horizon):
        step(state, params)
    return state.trajectory


def alive_sets(params: CtpParams, horizon: int, seed: int, cap: int = POPULATION_CAP) -> List[FrozenSet[Path]]:
    """Current-generation alive sets A_n ∩ Λ_n for n = 0..horizon under a shared seed."""
    state = init(params, seed, cap)
    sets = [state.current_generation()]
    for _ in range(horizon):
        step(state, params)
        sets.append(state.current_generation())
    return sets
