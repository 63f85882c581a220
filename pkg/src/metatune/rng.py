"""Deterministic randomness and stable hashing.

Every randomized component (sampler, synthetic generator) draws from
SplitMix64 so that a seed fully determines the output stream, independent
of platform, process, or PYTHONHASHSEED. The feature hash is keyed
blake2b, also stable everywhere.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood; public-domain constants).

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

    All arithmetic mod 2^64.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_uint64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias (rejection)."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            v = self.next_uint64()
            if v < limit:
                return v % n

    def random(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def shuffle(self, seq) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]


def stable_hash128(data: str, salt: int = 0) -> tuple[int, int]:
    """Two independent 64-bit hashes of a string (keyed blake2b-128).

    Returns (low, high) halves of the little-endian digest. Stable across
    processes and platforms; `salt` reseeds the whole family.
    """
    h = hashlib.blake2b(
        data.encode("utf-8"),
        digest_size=16,
        salt=(salt & _MASK64).to_bytes(8, "little"),
    ).digest()
    return int.from_bytes(h[:8], "little"), int.from_bytes(h[8:], "little")


def stable_hash64(data: str, salt: int = 0) -> int:
    return stable_hash128(data, salt)[0]
