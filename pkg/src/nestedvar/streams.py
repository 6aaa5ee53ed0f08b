"""Named, reproducible random streams.

Every stream is a ``SeedSequence`` child addressed by a path of keys, e.g.
``(scheme, epsilon index, replication, level, purpose)``. Streams with
different paths are statistically independent and do not depend on the
order in which they are created, so replications can run in any order or
in parallel.
"""
from __future__ import annotations

import zlib

import numpy as np

__all__ = ["as_seed_sequence", "child_seed", "stream", "key_of"]


def key_of(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    k = int(key)
    if k < 0:
        raise ValueError(f"stream keys must be non-negative, got {key!r}")
    return k


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # Draw a fresh entropy word; keeps a Generator usable as a seed source.
        return np.random.SeedSequence(int(seed.integers(0, 2**63)))
    if seed is None:
        return np.random.SeedSequence()
    return np.random.SeedSequence(int(seed))


def child_seed(seed, *keys) -> np.random.SeedSequence:
    parent = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + tuple(key_of(k) for k in keys),
        pool_size=parent.pool_size,
    )


def stream(seed, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed(seed, *keys)))
