"""Deterministic derived seeds for parallel Monte-Carlo streams."""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """64-bit seed mixed from ``master`` and any number of indices."""
    s = splitmix64(master & _MASK)
    for i in indices:
        s = splitmix64(s ^ (int(i) & _MASK))
    return s


def derived_rng(master: int, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *indices))
