"""Counter-based random streams for reproducible parallel Monte Carlo.

Every stream is a pure function of a 64-bit key and a counter: value k of
stream `key` is ``mix64(key + (k+1)*GOLDEN)``, the SplitMix64 output
function.  Streams derived from distinct index tuples are independent for
all practical purposes, can be consumed on different threads, and produce
identical output regardless of scheduling.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1

# offset between logical draw sub-spaces of one stream (see Stream.fork)
_SUBSPACE = 1 << 40


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a python int (mod 2^64)."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK
    return x ^ (x >> 31)


def derive_key(*indices: int) -> int:
    """Hash an index tuple (master seed first) into a 64-bit stream key.

    Chained SplitMix64 steps: each index perturbs the running state, so
    (seed, i, j) and (seed, j, i) give unrelated keys.
    """
    state = 0
    for ix in indices:
        state = mix64(state + _GOLDEN + (int(ix) & _MASK))
    return state


def _mix_array(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
    return x ^ (x >> np.uint64(31))


def derive_keys(base: int, count: int) -> np.ndarray:
    """Vectorized tail of derive_key: keys for indices 0..count-1 under `base`.

    derive_keys(derive_key(*head), n)[j] == derive_key(*head, j).
    """
    j = np.arange(count, dtype=np.uint64)
    return _mix_array(np.uint64((base + _GOLDEN) & _MASK) + j)


def counter_uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniforms in (0,1) indexed by (key, counter), broadcasting the args.

    Pure counter mode: element (k, c) never depends on what else was drawn.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.atleast_1d(np.asarray(counters, dtype=np.uint64))
    state = keys + (counters + np.uint64(1)) * np.uint64(_GOLDEN)
    bits = _mix_array(state) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0 ** -53


class Stream:
    """A single random stream; not thread-safe, but cheap to derive."""

    __slots__ = ("key", "_counter")

    def __init__(self, key: int):
        self.key = int(key) & _MASK
        self._counter = 0

    @classmethod
    def from_indices(cls, *indices: int) -> "Stream":
        return cls(derive_key(*indices))

    def fork(self, tag: int) -> "Stream":
        """Independent child stream (used e.g. for tie re-draws)."""
        return Stream(derive_key(self.key, tag))

    def random(self, size: int) -> np.ndarray:
        """Next `size` uniforms in (0,1)."""
        c = np.arange(self._counter, self._counter + size, dtype=np.uint64)
        self._counter += size
        return counter_uniforms(np.uint64(self.key), c)

    def uniform(self, low: float, high: float, size: int) -> np.ndarray:
        return low + (high - low) * self.random(size)

    def exponential(self, scale: float, size: int) -> np.ndarray:
        return -scale * np.log(self.random(size))

    def normal(self, size: int) -> np.ndarray:
        """Standard normals via Box-Muller (pairs drawn even for odd size)."""
        m = (size + 1) // 2
        u1 = self.random(m)
        u2 = self.random(m)
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([radius * np.cos(2.0 * np.pi * u2),
                            radius * np.sin(2.0 * np.pi * u2)])
        return z[:size]

    def poisson(self, mean: float) -> int:
        """One Poisson count by inversion of exponential gaps (small means)."""
        total = 0.0
        count = -1
        while total <= mean:
            block = self.exponential(1.0, 16)
            for g in block:
                total += g
                count += 1
                if total > mean:
                    break
        return count
