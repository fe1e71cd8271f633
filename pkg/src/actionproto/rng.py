"""Seeded random streams.

Every random draw in the package comes from numpy's PCG64 bit generator fed by
a ``SeedSequence``. Substreams are addressed by a key path, e.g.
``substream(seed, "kmeans", 3)`` for the K-Means run with k=3, so the same
stream is obtained whether work is done serially or in parallel.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            return 2**32 + int(key)
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def substream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``seed`` and the path ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys) -> int:
    """Integer seed for a child component, stable across runs."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
