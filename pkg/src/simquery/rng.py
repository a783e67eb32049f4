"""Portable seeded randomness used for every stochastic decision in the package.

The core generator is splitmix64 (Steele, Lea and Flood, "Fast splittable
pseudorandom number generators", OOPSLA 2014): a published, well-studied
64-bit PRNG that is five lines of integer arithmetic and therefore trivial
to reproduce in any other language or implementation. Python's own RNGs are
deliberately avoided so that a seed written into a manifest pins behaviour
forever.

Conventions, all of which are part of the reproducibility contract:

* State advances as ``state = (state + 0x9E3779B97F4A7C15) mod 2**64`` and
  each output is the splitmix64 finalizer of the new state.
* Subsystem streams derive their seed as
  ``mix64(master_seed XOR fnv1a64(label))`` where ``label`` is a short
  UTF-8 string naming the stream, with components joined by ``"\\x1f"``.
* Bounded integers use rejection sampling (no modulo bias).
* Sampling without replacement is a partial Fisher-Yates shuffle over the
  positions ``0..n-1``.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of ``data``."""
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def mix64(z: int) -> int:
    """splitmix64 output finalizer: bijective scramble of a 64-bit value."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def derive_seed(master: int, *parts: str) -> int:
    """Seed for a named substream of ``master``.

    Distinct labels give statistically independent streams; the same label
    always gives the same stream.
    """
    label = "\x1f".join(parts).encode("utf-8")
    return mix64((master & _MASK64) ^ fnv1a64(label))


class PortableRng:
    """splitmix64 generator with the helpers the package needs."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def uniform01(self) -> float:
        """Uniform double in the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        bound = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < bound:
                return x % n

    def sample_positions(self, n: int, k: int) -> list[int]:
        """k distinct positions from 0..n-1 by partial Fisher-Yates.

        Returned in selection order (not sorted); callers decide ordering.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        n = len(items)
        for i in range(n - 1):
            j = i + self.randbelow(n - i)
            items[i], items[j] = items[j], items[i]
