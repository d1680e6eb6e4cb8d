"""Deterministic 64-bit PRNG: splitmix64 stream, Box-Muller normals.

Same seed, same platform => same stream, which is what makes training
runs and dataset generation byte-reproducible.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class Rng:
    """splitmix64 generator with a cached second Box-Muller normal."""

    def __init__(self, seed: int):
        self.state = seed & _MASK
        self._normal_cache = None

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform(self, a: float, b: float) -> float:
        if not a < b:
            raise ValueError(f"uniform requires a < b, got [{a}, {b})")
        return a + (b - a) * self.random()

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        if self._normal_cache is not None:
            z = self._normal_cache
            self._normal_cache = None
        else:
            # u1 in (0, 1] so the log is finite.
            u1 = ((self.next_u64() >> 11) + 1) * 2.0 ** -53
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            theta = 2.0 * math.pi * u2
            z = r * math.cos(theta)
            self._normal_cache = r * math.sin(theta)
        return mean + std * z
