"""Deterministic PRNG primitives used wherever reproducibility is promised.

Zero-shot splits and synthetic generation must produce identical output for
identical seeds on every platform, so nothing here delegates to ``random``
or numpy generators. The algorithms are pinned:

* stream: SplitMix64 (Steele et al.), 64-bit state, one output per step
* uniform doubles: top 53 bits of an output, giving [0, 1)
* normal variates: Box-Muller, cosine branch only, one variate per
  (u1, u2) pair where u1 is mapped into (0, 1]
* shuffling: Fisher-Yates from the top index down, j = next() mod (i + 1)
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 stream seeded with an arbitrary non-negative integer."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, bound: int) -> int:
        """Integer in [0, bound) via modulo reduction (bound << 2**64)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def normal(self) -> float:
        """Standard normal variate via Box-Muller (cosine branch)."""
        u1 = 1.0 - self.uniform()  # (0, 1]: keeps log() finite
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> list:
        """In-place Fisher-Yates shuffle; returns the list for chaining."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
