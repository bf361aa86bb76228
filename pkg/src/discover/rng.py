"""Deterministic pseudo-random number generation.

Every stochastic step in the pipeline (splitting, subsampling, candidate
sampling, weight init, permutation shuffles) draws from this generator so
that a run is reproducible bit-for-bit across platforms and worker counts.

The stream is splitmix64 (Steele, Lea & Flood 2014): state advances by the
64-bit golden-ratio constant and each output is a finalizing mix of the
state.  Constants:

    increment   0x9E3779B97F4A7C15
    mix mult 1  0xBF58476D1CE4E5B9
    mix mult 2  0x94D049BB133111EB

Child streams are derived by counter (``spawn``), never by draw order, so
parallel stages produce identical results regardless of scheduling.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_INCREMENT = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """splitmix64 stream with vectorized block output."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _INCREMENT) & _MASK64
        return _mix(self._state)

    def u64_block(self, n: int) -> np.ndarray:
        """Next `n` outputs as a uint64 array (consumes n states)."""
        if n < 0:
            raise ValueError("block size must be non-negative")
        ks = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + ks * np.uint64(_INCREMENT)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _INCREMENT) & _MASK64
        return z

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random mantissa bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def float_block(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("upper bound must be positive")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic uniform permutation of range(n).

        Implemented as argsort of a block of stream outputs; a 64-bit key
        collision over desk-scale n is negligible and the stable sort keeps
        the result well-defined even then.
        """
        return np.argsort(self.u64_block(n), kind="stable")

    def shuffle(self, values: np.ndarray) -> np.ndarray:
        return values[self.permutation(len(values))]

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} from {n}")
        return self.permutation(n)[:k]

    def normal_block(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller on stream floats."""
        m = (n + 1) // 2
        u1 = (self.u64_block(m) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u2 = (self.u64_block(m) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log1p(-u1))  # u1 in [0,1) so 1-u1 in (0,1]
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def spawn(self, key: int) -> "Rng":
        """Child stream addressed by counter, independent of draw order."""
        return Rng(_mix(self._state ^ _mix(int(key) & _MASK64)))
