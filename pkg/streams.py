"""
Reproducible random streams.

Trial generators are PCG64 streams seeded from a 64-bit mix of
(master_seed, trial_index), so results never depend on execution order.
Per-vertex uniforms for the coupled reference simulator are a hash of
(trial seed, genealogical path).
"""

import hashlib
import struct
from typing import Tuple

import numpy as np

MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / float(1 << 53)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix64(master_seed: int, index: int) -> int:
    """64-bit hash mix of two words."""
    return splitmix64(splitmix64(master_seed & MASK64) ^ (index & MASK64))


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one trial (or one chunk of clusters)."""
    return np.random.default_rng(np.random.PCG64(mix64(master_seed, trial_index)))


class PathUniforms:
    """Uniforms attached to genealogical paths.

    Each path x gets three uniforms on [0,1): one inverted into the offspring
    count xi_x, one for detection (eta_D = 1{U_x < p}) and one for the edge to
    its parent (eta_T = 1{W_x < alpha}). Sharing the seed across parameter
    settings gives the monotone coupling in p and alpha.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64

    def uniforms(self, path: Tuple[int, ...]) -> Tuple[float, float, float]:
        key = struct.pack(f"<Q{len(path)}I", self.seed, *path)
        digest = hashlib.blake2b(key, digest_size=24).digest()
        a, b, c = struct.unpack("<3Q", digest)
        return (a >> 11) * _INV_2_53, (b >> 11) * _INV_2_53, (c >> 11) * _INV_2_53

    def offspring_uniform(self, path):
        return self.uniforms(path)[0]

    def detection_uniform(self, path):
        return self.uniforms(path)[1]

    def trace_uniform(self, path):
        return self.uniforms(path)[2]
