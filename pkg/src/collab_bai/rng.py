"""Seeded, splittable random streams.

Every stream is a PCG64 generator keyed by ``SeedSequence(seed, spawn_key=key)``.
Child streams extend the key, so a (trial, role, round, agent) tuple always maps
to the same independent sequence regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class SeededRng:
    """A single-owner random stream identified by ``(seed, stream)``.

    ``child(*key)`` derives an independent stream without touching this one's
    state, which is what the engine uses for per-agent and per-round draws.
    """

    __slots__ = ("seed", "key", "gen")

    def __init__(self, seed: int, stream: int | tuple[int, ...] = 0):
        self.seed = int(seed) & _MASK64
        if isinstance(stream, tuple):
            self.key = tuple(int(k) & _MASK64 for k in stream)
        else:
            self.key = (int(stream) & _MASK64,)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def stream(self) -> int:
        return self.key[0]

    def child(self, *key: int) -> "SeededRng":
        return SeededRng(self.seed, self.key + tuple(key))

    def random(self, size=None):
        return self.gen.random(size)

    def binomial(self, n: int, p: float) -> int:
        # Degenerate means are handled here so 0/1 arms never touch the sampler.
        if n <= 0 or p <= 0.0:
            return 0
        if p >= 1.0:
            return int(n)
        return int(self.gen.binomial(n, p))

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, key={self.key})"


# Stream roles inside one simulated run. Kept as small ints so keys stay numeric.
ROLE_SHARED = 1
ROLE_AGENT = 2
ROLE_THRESHOLD = 3
ROLE_SUBRUN = 4
ROLE_CENTRAL = 5
