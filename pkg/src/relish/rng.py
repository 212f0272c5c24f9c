"""Counter-based deterministic random numbers, portable across languages.

Draw i from stream (seed, stream_id) is a pure function of the three
integers, so any runtime that can do 64-bit wrapping arithmetic
reproduces the exact bit pattern. The mixer is the splitmix64 finalizer
applied to seed ^ (stream_id * GOLDEN) ^ (index * GOLDEN2).

  mix(x): x += 0x9E3779B97F4A7C15
          x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
          x = (x ^ (x >> 27)) * 0x94D049BB133111EB
          return x ^ (x >> 31)

Uniforms map the top 53 bits to [0, 1); normals pair consecutive
uniforms through Box-Muller with log(1 - u1) so the argument never hits
zero.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN2 = np.uint64(0xC2B2AE3D27D4EB4F)
_U53 = 1.0 / float(1 << 53)

# Registry of stream ids, so no two uses of one seed ever share a
# stream. Base values leave room below for indexed families.
STREAM_HEAD_INIT = 1
STREAM_LINEAR_INIT = 2
STREAM_MLP_INIT = 3
STREAM_GRID_INIT = 4
STREAM_PLANT_DIRECTIONS = 5
STREAM_SPLIT_SHUFFLE = 6
STREAM_TOKEN_EMBED_BASE = 1 << 32  # + token id
STREAM_EXAMPLE_BASE = 1 << 33  # + example index
STREAM_EPOCH_BASE = 1 << 34  # + epoch index


def mix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; wrapping 64-bit semantics throughout."""
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def stream_key(seed: int, stream_id: int) -> np.uint64:
    with np.errstate(over="ignore"):
        return np.uint64(seed) ^ (np.uint64(stream_id) * _GOLDEN)


class CounterRng:
    """Stateless-by-index generator: draw(i) is reproducible in O(1)."""

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self._key = stream_key(seed, stream_id)
        self._next = 0

    def _raw(self, start: int, count: int) -> np.ndarray:
        idx = np.arange(start, start + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return mix64(self._key ^ (idx * _GOLDEN2))

    def uniforms(self, count: int) -> np.ndarray:
        """Next ``count`` doubles in [0, 1), advancing the counter."""
        bits = self._raw(self._next, count)
        self._next += count
        return (bits >> np.uint64(11)).astype(np.float64) * _U53

    def normals(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller over consecutive uniform pairs."""
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        radius = np.sqrt(-2.0 * np.log(1.0 - u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count]

    def uniform_matrix(self, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
        return (lo + (hi - lo) * self.uniforms(rows * cols)).reshape(rows, cols)

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normals(rows * cols).reshape(rows, cols)

    def integers(self, count: int, upper: int) -> np.ndarray:
        """Integers in [0, upper) by scaling uniforms; upper must be tiny
        relative to 2**53 so the floor bias is negligible."""
        if upper <= 0:
            raise ValueError("upper must be positive")
        return np.floor(self.uniforms(count) * upper).astype(np.int64)

    def shuffled(self, n: int) -> np.ndarray:
        """Permutation of range(n) by sorting uniform draws (ties broken by
        index, which cannot collide for n << 2**53 in practice)."""
        return np.argsort(self.uniforms(n), kind="stable")
