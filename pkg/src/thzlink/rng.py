"""Deterministic seeding utilities.

Child seeds are derived from (base_seed, index, ...) tuples with SplitMix64
mixing steps, so every Monte Carlo block owns a stream that is a pure
function of its coordinates: results cannot depend on scheduling or worker
count.  The streams themselves come from numpy's counter-based Philox
generator keyed by the derived seed.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
# SplitMix64 constants (Steele, Lea, Flood: "Fast splittable PRNGs").
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche mix."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Derive a 64-bit child seed by absorbing each index in sequence.

    Deterministic in its arguments and nothing else.  Negative indices are
    not allowed; they would alias under the 64-bit mask.
    """
    state = mix64(base_seed ^ _GOLDEN)
    for ix in indices:
        if ix < 0:
            raise ValueError("seed indices must be non-negative")
        state = (state + _GOLDEN) & _MASK64
        state = mix64(state ^ (ix & _MASK64))
    return state


def generator(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
