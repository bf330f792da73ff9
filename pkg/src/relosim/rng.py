"""Named random substreams derived from one scenario seed.

Every consumer of randomness (placement, per-iteration permutation,
alternative sampling, vehicle ownership, workplace draw, calibration
starts) gets its own stream keyed by a stable name, so overriding or
reordering one consumer never shifts the draws seen by another.
"""

import zlib

import numpy as np


def _key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Generator for the (seed, name, indices...) stream, stable across runs."""
    entropy = [int(seed) & 0xFFFFFFFF, _key(name), *[int(i) for i in indices]]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
