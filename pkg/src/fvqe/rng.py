"""Counter-based seed derivation.

Every random draw in the package is keyed by a tuple of non-negative
integers appended to a root seed. ``derive(seed, a, b)`` is the
:class:`numpy.random.SeedSequence` with entropy ``seed`` and spawn key
``(a, b)``, so any single draw can be re-derived in isolation and parallel
workers never share a stream.
"""
from __future__ import annotations

import zlib

import numpy as np


def derive(seed, *keys) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def generator(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(derive(seed, *keys))


def derive_int(seed, *keys) -> int:
    return int(derive(seed, *keys).generate_state(1, np.uint32)[0])


def label_key(label: str) -> int:
    """Stable integer key for a string label (e.g. an algorithm name)."""
    return zlib.crc32(label.encode())
