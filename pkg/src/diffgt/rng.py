"""Seeded random generation.

Every stochastic choice in the package flows through a RandomSource so a
run is bit-reproducible from its seed. Sources are single-owner: do not
share one instance across threads; derive children instead.
"""

from __future__ import annotations

import numpy as np


class RandomSource:
    """Deterministic random stream backed by a counter-based PCG64 generator.

    The (seed, stream) pair fully determines the draw sequence: the same
    pair plus the same call sequence reproduces identical outputs
    bit-for-bit.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.calls = 0
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream]))
        )

    def child(self, stream: int) -> "RandomSource":
        """Independent stream derived from the same seed."""
        return RandomSource(self.seed, stream)

    def standard_normal(self, rows: int, cols: int) -> np.ndarray:
        """rows x cols matrix of i.i.d. N(0, 1) draws."""
        if rows < 1 or cols < 1:
            raise ValueError(f"need rows, cols >= 1, got {rows} x {cols}")
        self.calls += 1
        return self._gen.standard_normal((rows, cols))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        self.calls += 1
        return self._gen.uniform(low, high, shape)

    def integers(self, low: int, high: int, size=None):
        """Draws from [low, high), matching numpy's half-open convention."""
        self.calls += 1
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        self.calls += 1
        return self._gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct values from [0, n)."""
        self.calls += 1
        return self._gen.choice(n, size=k, replace=False)
