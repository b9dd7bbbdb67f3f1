"""Portable deterministic random streams.

Everything random in the toolkit (transform parameters, split shuffles) is
drawn from SplitMix64 so that results depend only on integers and 64-bit
wrap-around arithmetic, never on a library's generator internals:

    state = state + 0x9E3779B97F4A7C15            (mod 2**64)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB      (mod 2**64)
    output z ^ (z >> 31)

Stream keys combine several parts (seed, ids, counters). Strings are hashed
with 64-bit FNV-1a over their UTF-8 bytes and each part is folded in with
``key = mix64(key ^ part)``.
"""

from __future__ import annotations

from typing import Iterable, MutableSequence, TypeVar

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

T = TypeVar("T")


def mix64(z: int) -> int:
    """SplitMix64 finaliser: a bijection on 64-bit integers."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def stream_key(*parts: int | str) -> int:
    key = 0
    for part in parts:
        value = fnv1a64(part) if isinstance(part, str) else int(part) & MASK64
        key = mix64((key ^ value) + GOLDEN)
    return key


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform float in [lo, hi) from the top 53 bits of one draw."""
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection of the short last bucket."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def coin(self) -> bool:
        return bool(self.next_u64() >> 63)

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates: for i = n-1 .. 1, swap items[i] with items[below(i+1)]."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def shuffled(items: Iterable[T], seed: int) -> list[T]:
    out = list(items)
    SplitMix64(seed).shuffle(out)
    return out
