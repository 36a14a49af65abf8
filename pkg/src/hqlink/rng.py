"""Deterministic seeded randomness.

All randomness in the package flows from one master seed through the
counter-based Philox generator.  Child streams are derived from explicit
labels, never from call order, so parallel shards and repeated runs stay
reproducible.
"""

from __future__ import annotations

import zlib

import numpy as np


def child_rng(master_seed: int, *path: int | str) -> np.random.Generator:
    """Generator for a named substream of the master seed.

    String path components are hashed with crc32; integer components are used
    directly.  The same (seed, path) always yields the same stream.
    """
    key = tuple(zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in path)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept either a Generator or an integer seed."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return child_rng(int(seed_or_rng))
