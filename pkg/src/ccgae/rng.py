"""Seeded, splittable random streams.

Every stochastic consumer (weight init, corruption, walkback resampling,
chain sampling, shuffling) owns its own stream, split off a root seed by
purpose keys.  Splitting is deterministic: the same seed and the same key
path always yield the same draw sequence, so runs reproduce bit-for-bit
and changing how often one consumer draws cannot perturb another.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key: int | str) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if isinstance(key, (int, np.integer)):
        k = int(key)
        if not 0 <= k < 2**32:
            raise ValueError(f"integer split key out of range [0, 2^32): {k}")
        return k
    raise TypeError(f"split key must be int or str, got {type(key).__name__}")


class RngStream:
    """A deterministic PCG64 stream addressable by a (seed, key path) pair."""

    __slots__ = ("_seq", "gen")

    def __init__(self, seq: np.random.SeedSequence):
        self._seq = seq
        self.gen = np.random.Generator(np.random.PCG64(seq))

    @classmethod
    def from_seed(cls, seed: int) -> "RngStream":
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        return cls(np.random.SeedSequence(seed))

    def split(self, *keys: int | str) -> "RngStream":
        """Derive an independent child stream named by `keys`."""
        if not keys:
            raise ValueError("split requires at least one key")
        spawn_key = self._seq.spawn_key + tuple(_key_to_int(k) for k in keys)
        return RngStream(np.random.SeedSequence(self._seq.entropy, spawn_key=spawn_key))

    # Thin delegations for the draws the package actually uses.

    def random(self, size=None):
        return self.gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def bernoulli(self, probs: np.ndarray) -> np.ndarray:
        """Elementwise Bernoulli draw, returned as a float64 0/1 vector."""
        probs = np.asarray(probs, dtype=np.float64)
        return (self.gen.random(probs.shape) < probs).astype(np.float64)
