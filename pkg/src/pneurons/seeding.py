"""Master-seed splitting.

Every random stream is derived from ``(seed, label, index)``: the 64-bit
master seed is split into two 32-bit words, the label is reduced with
CRC-32 and the result is handed to :class:`numpy.random.SeedSequence`.
The rule is stable across platforms and processes, so any stream can be
recreated in isolation.
"""
from __future__ import annotations

import zlib
from typing import Iterable, Union

import numpy as np

from .errors import SeedError

Index = Union[int, Iterable[int]]

SEED_LIMIT = 2**64


def _entropy(seed: int, label: str, index: Index) -> list[int]:
    seed = int(seed)
    if not 0 <= seed < SEED_LIMIT:
        raise SeedError(f"master seed must be a 64-bit unsigned integer, got {seed}")
    if isinstance(index, (int, np.integer)):
        index = [int(index)]
    index = [int(i) for i in index]
    if any(i < 0 for i in index):
        raise SeedError("stream indices must be non-negative")
    return [seed & 0xFFFFFFFF, seed >> 32, zlib.crc32(label.encode("utf-8")), *index]


def substream(seed: int, label: str, index: Index = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(_entropy(seed, label, index))


def generator(seed: int, label: str, index: Index = 0) -> np.random.Generator:
    """A PCG64 generator for the substream ``(seed, label, index)``."""
    return np.random.Generator(np.random.PCG64(substream(seed, label, index)))


def nonzero_words(seed: int, label: str, index: Index = 0, count: int = 1,
                  width: int = 32) -> list[int]:
    """``count`` distinct nonzero ``width``-bit words, e.g. for LFSR seeds."""
    rng = generator(seed, label, index)
    words: list[int] = []
    while len(words) < count:
        w = int(rng.integers(1, 2**width, dtype=np.uint64))
        if w not in words:
            words.append(w)
    return words
