"""Deterministic cross-platform randomness.

Fold plans and synthetic corpora must be byte-identical across runs, platforms,
and reimplementations in other languages, so nothing here touches the stdlib
``random`` module. The generator is splitmix64; the shuffle is Fisher-Yates.

Reproduction recipe (for an alternate-language twin):

* state starts at ``seed`` (mod 2^64)
* next():  state += 0x9E3779B97F4A7C15;  z = state;
           z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
           z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
           return z ^ (z >> 31)           (all arithmetic mod 2^64)
* below(n) = next() % n   (modulo; no rejection sampling)
* shuffle: for i from len-1 down to 1: j = below(i + 1); swap a[i], a[j]
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Integer in [0, bound). Modulo bias is acceptable here; the documented
        recipe matters more than uniformity in the 2^-64 tail."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next() % bound

    def uniform(self) -> float:
        return self.next() / 2.0**64

    def choice(self, items):
        return items[self.below(len(items))]


def shuffle(items: list, rng: SplitMix64) -> None:
    """In-place Fisher-Yates shuffle driven by ``rng``."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]
