"""Small reproducible PRNG (xorshift64*) used for all model randomness.

The generator is deliberately simple and fully specified so that row and
column subsamples are identical for a given seed on every platform:

* seeding: ``state = splitmix64(seed)``, replaced by a fixed odd constant if
  that yields 0 (xorshift has an all-zero fixed point);
* step: ``x ^= x >> 12; x ^= x << 25; x ^= x >> 27``, output ``x * 0x2545F4914F6CDD1D``;
* ``random()`` takes the top 53 bits of the output and scales by ``2**-53``;
* ``randbelow(n)`` is ``floor(random() * n)``.
"""
from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Independent, reproducible child seed for item ``index`` of a batch."""
    return splitmix64((base_seed & _MASK) ^ splitmix64(index & _MASK)) & 0x7FFFFFFFFFFFFFFF


class XorShift64Star:
    def __init__(self, seed: int):
        state = splitmix64(seed & _MASK)
        self.state = state or _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        return int(self.random() * n)

    def sample(self, n: int, k: int) -> np.ndarray:
        """Sorted ``k``-subset of ``range(n)`` drawn without replacement.

        Partial Fisher-Yates; ``k == n`` returns everything without drawing.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        if k == n:
            return np.arange(n)
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return np.sort(np.asarray(pool[:k], dtype=np.intp))


def subsample_count(fraction: float, n: int) -> int:
    """``ceil(fraction * n)``, ignoring float fuzz such as ``0.7 * 10``."""
    return max(1, min(n, math.ceil(round(fraction * n, 9))))
