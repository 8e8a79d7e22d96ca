"""Counter-based random substreams.

Every random quantity in the package is a pure function of a 64-bit stream
key and a tuple of integer counters (building id, trajectory index, ...).
Draws therefore do not depend on evaluation order or worker count, and the
compiled kernel reproduces the same numbers bit for bit.

Derivation: ``key(child) = mix(key(parent) ^ crc32(name))`` followed by one
``mix`` per integer word; a uniform is ``((h >> 11) + 0.5) * 2**-53``.
"""
from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finaliser on a Python int."""
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def hash_words(key: int, *words: int) -> int:
    h = key & MASK64
    for w in words:
        h = mix64(h ^ (w & MASK64))
    return h


def u01(h: int) -> float:
    """Map a 64-bit hash to the open interval (0, 1)."""
    return ((h >> 11) + 0.5) * _INV53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class Stream:
    """A named, keyed random substream.

    Parameters
    ----------
    key : int
        64-bit stream key. Use :meth:`from_seed` to build a root stream
        from a master seed.
    """

    __slots__ = ("key",)

    def __init__(self, key: int):
        self.key = int(key) & MASK64

    @classmethod
    def from_seed(cls, seed: int) -> "Stream":
        return cls(mix64(int(seed) & MASK64))

    def child(self, name: str | int, *words: int) -> "Stream":
        tag = zlib.crc32(name.encode()) if isinstance(name, str) else int(name)
        return Stream(hash_words(self.key, tag, *words))

    def uniform(self, *words: int) -> float:
        return u01(hash_words(self.key, *words))

    def normal(self, *words: int) -> float:
        return float(ndtri(self.uniform(*words)))

    def uniforms(self, counters, *prefix: int) -> np.ndarray:
        """Vectorised ``uniform(*prefix, c)`` over an integer array of counters."""
        h = hash_words(self.key, *prefix)
        c = np.asarray(counters, dtype=np.int64).astype(np.uint64)
        with np.errstate(over="ignore"):
            z = _mix64_array(np.uint64(h) ^ c)
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53

    def normals(self, counters, *prefix: int) -> np.ndarray:
        return ndtri(self.uniforms(counters, *prefix))

    def numpy(self) -> np.random.Generator:
        """A numpy Generator seeded from this stream's key."""
        return np.random.default_rng(np.random.SeedSequence(self.key))

    def __repr__(self) -> str:
        return f"Stream(0x{self.key:016x})"
