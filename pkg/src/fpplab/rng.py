"""Counter-based random number streams.

Every sampler in this package draws from an :class:`RngStream`, a value type
identified by a 64-bit seed and a 64-bit stream id.  Identical (seed, stream)
pairs always produce bit-identical draws, and distinct stream ids give
statistically independent streams (they key separate Philox counters), so
replicas can run in any order, or concurrently, without coordination.

A stream is *positional*: ``uniforms(n, start)`` returns the n uniforms at
absolute positions ``start .. start+n-1`` of the stream, independent of any
earlier calls.  Grid generators exploit this to hand out a fixed block of
positions per lattice site.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for one reproducible random stream."""

    seed: int
    stream: int = 0

    def generator(self, start: int = 0) -> np.random.Generator:
        """A fresh Generator positioned at draw index `start`.

        Philox advances in blocks of 4 64-bit outputs; `start` is measured in
        double draws (one 64-bit word each), so we advance whole blocks and
        discard the remainder.
        """
        bg = np.random.Philox(key=[self.seed & _MASK64, self.stream & _MASK64])
        blocks, rem = divmod(start, 4)
        if blocks:
            bg.advance(blocks)
        g = np.random.Generator(bg)
        if rem:
            g.random(rem)
        return g

    def uniforms(self, n: int, start: int = 0) -> np.ndarray:
        """Uniforms at positions start..start+n-1 (one 64-bit word each)."""
        return self.generator(start).random(n)

    def split(self, *indices: int) -> "RngStream":
        """Derive an independent child stream from a path of integers."""
        s = self.stream
        for ix in indices:
            s = _splitmix64(s ^ _splitmix64(ix & _MASK64))
        return RngStream(self.seed, s)
