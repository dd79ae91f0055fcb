"""Seeded random streams.

Bulk input data comes from a Philox generator keyed by (seed, benchmark name);
kernels that need per-element randomness independent of scheduling use the
stateless ``mix64`` counter hash.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1


def name_key(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``name`` under ``seed``."""
    key = (int(seed) & _MASK64) | (name_key(name) << 64)
    return np.random.Generator(np.random.Philox(key=key))


@njit(inline="always", cache=True)
def mix64(x):
    """splitmix64 finalizer applied to ``x + golden``; x is a uint64."""
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(inline="always", cache=True)
def counter_uniform(key, index):
    """Uniform double in [0, 1) determined only by (key, index)."""
    z = mix64(key ^ mix64(np.uint64(index)))
    return (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
