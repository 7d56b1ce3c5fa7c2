"""Seed derivation shared by the solver, the tuner and the bench.

``derive_seed(master, index)`` is SplitMix64 applied to
``master + (index + 1) * 0x9E3779B97F4A7C15`` (all arithmetic mod 2**64)::

    z = (master + (index + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    return z ^ (z >> 31)

Random streams are then drawn from ``numpy.random.Generator(PCG64(seed))``.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _check_u64(value: int, name: str) -> int:
    value = int(value)
    if not 0 <= value <= MASK64:
        raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")
    return value


def derive_seed(master: int, index: int) -> int:
    master = _check_u64(master, "master seed")
    if index < 0:
        raise ValueError("index must be non-negative")
    z = (master + (int(index) + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_check_u64(seed, "seed")))
