"""Seeded random substreams keyed by stable identifiers."""

import zlib

import numpy as np


def substream(seed: int, *keys) -> np.random.Generator:
    """Generator derived from ``seed`` and the string form of ``keys``.

    Keys are hashed with CRC32 rather than ``hash()`` so streams are stable
    across processes and independent of scheduling order.
    """
    words = [int(seed) & 0xFFFFFFFF] + [zlib.crc32(str(k).encode()) for k in keys]
    return np.random.default_rng(words)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
