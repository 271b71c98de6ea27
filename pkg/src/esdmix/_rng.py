"""Seed derivation shared by every seeded entry point."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic child seed for ``seed`` along an index path.

    Each step mixes ``seed XOR index`` through splitmix64, so child streams
    depend only on their position, never on execution order.
    """
    s = int(seed) & _MASK
    for idx in path:
        s = splitmix64(s ^ (int(idx) & _MASK))
    return s


def rng_for(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *path))
