"""Deterministic shuffling primitives.

Splits and fold assignments must be bit-identical for a given seed, on any
platform and under any library version.  They therefore use SplitMix64
(Steele, Lea & Flood 2014), a tiny 64-bit generator whose whole algorithm
fits below, combined with a Fisher-Yates shuffle that draws bounded integers
by rejection sampling (no modulo bias).
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """SplitMix64 pseudo-random generator over 64-bit state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n), rejection-sampled to avoid modulo bias."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_uint64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(base: int, *stream: int) -> int:
    """Deterministically derive a child seed from a base seed and stream ids.

    Used to give inner CV loops and per-parameter refolds their own seeds
    without correlating them with the parent plan.
    """
    out = SplitMix64(base).next_uint64()
    for s in stream:
        out = SplitMix64(out ^ (s & _MASK64)).next_uint64()
    return out
