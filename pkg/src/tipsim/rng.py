"""Deterministic 64-bit PRNG used everywhere randomness is drawn.

The generator is a plain splitmix64 stream.  The same update and draw
formulas are re-implemented inside the numba and numpy kernels, so a
simulation step executed by the Python engine and by either kernel backend
consumes identical random numbers and produces identical results.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer; a fixed 64-bit bijective hash."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def substream(master: int, index: int) -> int:
    """Derive an independent seed for substream `index` of `master`."""
    return mix64(mix64(master) ^ ((index + 1) * GOLDEN & MASK64))


def hash_bit(seed: int, step: int, node: int) -> bool:
    """Stateless pseudo-random bit keyed by (seed, step, node)."""
    return bool(mix64(mix64(seed) + step * GOLDEN + node * 0x9E3779B97F4A7C16) & 1)


class SplitMix64:
    """Sequential splitmix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def u01(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self.u01() * n)

    def bit(self) -> bool:
        return bool(self.next_u64() & 1)
