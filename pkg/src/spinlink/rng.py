"""Reproducible, splittable random streams.

Each stream is a Philox generator keyed by ``SeedSequence(seed, spawn_key=path)``
where ``path`` is a small tuple of integers ``(kind, index)``.  A window or a
cycle therefore always draws the same numbers no matter which worker process
simulates it or in which order, and streams never overlap.

Stream paths::

    (1, w)          operating window ``w``
    (2, c)          single cycle ``c`` (scalar API)
    (3, crc32(tag)) auxiliary streams (bootstrap, tomography resampling ...)
"""
from __future__ import annotations

import zlib

import numpy as np

from .errors import InvalidArgument

_WINDOW = 1
_CYCLE = 2
_AUX = 3


def _generator(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


class StreamFactory:
    """Derives independent generators from one 64-bit master seed."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InvalidArgument(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed

    def window(self, index: int) -> np.random.Generator:
        return _generator(self.seed, _WINDOW, index)

    def cycle(self, index: int) -> np.random.Generator:
        return _generator(self.seed, _CYCLE, index)

    def aux(self, tag: str) -> np.random.Generator:
        return _generator(self.seed, _AUX, zlib.crc32(tag.encode()))

    def __repr__(self) -> str:
        return f"StreamFactory(seed={self.seed})"
