"""Portable pseudo-random numbers.

Every random draw in the package goes through :class:`Rng` so that results are
reproducible bit-for-bit in any language:

* seeding: ``splitmix64`` expands a 64-bit seed into the 256-bit state of a
  ``xoshiro256**`` generator (xorshift family);
* scalar draws (sampling without replacement, shuffles, offsets) come from the
  ``xoshiro256**`` stream;
* bulk arrays (pixel noise, weight init) are produced by a counter-mode
  ``splitmix64`` stream keyed by one ``next_u64()`` of the main stream, which
  numpy can evaluate in one vectorised pass.

Floats are built from the top 53 bits: ``(u >> 11) * 2**-53``.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(x: int) -> int:
    """One splitmix64 finaliser applied to ``x + gamma``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Combine a base seed with integer keys (e.g. a row index) into a new seed."""
    s = splitmix64(seed & MASK64)
    for k in keys:
        s = splitmix64(s ^ splitmix64(k & MASK64))
    return s


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64_array(key: int, size: int) -> np.ndarray:
    """Counter-mode splitmix64: element i is ``splitmix64(key + i*gamma)``."""
    with np.errstate(over="ignore"):
        idx = np.arange(1, size + 1, dtype=np.uint64)
        z = np.uint64(key & MASK64) + idx * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class Rng:
    """xoshiro256** seeded by splitmix64."""

    def __init__(self, seed: int):
        state = []
        x = seed & MASK64
        for _ in range(4):
            state.append(splitmix64(x))
            x = (x + GOLDEN_GAMMA) & MASK64
        self._s = state

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Float in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection on the top bits."""
        if n <= 0:
            raise ValueError("n must be positive")
        bits = max(1, (n - 1).bit_length())
        while True:
            r = self.next_u64() >> (64 - bits)
            if r < n:
                return r

    def randint(self, lo: int, hi: int) -> int:
        """Integer in the closed range [lo, hi]."""
        return lo + self.randbelow(hi - lo + 1)

    def sample(self, population: int, k: int) -> list[int]:
        """k distinct integers from range(population), partial Fisher-Yates order."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot sample {k} from {population}")
        pool = list(range(population))
        for i in range(k):
            j = i + self.randbelow(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def permutation(self, n: int) -> list[int]:
        return self.sample(n, n)

    def normal(self) -> float:
        """Standard normal via Box-Muller (cosine branch only)."""
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def uniform_array(self, shape) -> np.ndarray:
        size = int(np.prod(shape))
        raw = splitmix64_array(self.next_u64(), size)
        return ((raw >> np.uint64(11)).astype(np.float64) * _INV_2_53).reshape(shape)

    def normal_array(self, shape) -> np.ndarray:
        size = int(np.prod(shape))
        u = self.uniform_array((2, size))
        u1 = 1.0 - u[0]
        return (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u[1])).reshape(shape)
