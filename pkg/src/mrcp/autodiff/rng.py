"""Seeded counter-based random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngState:
    """A 64-bit seed from which independent Philox substreams are derived.

    ``stream(*ids)`` always returns a generator at the start of the same
    counter sequence for the same ``(seed, ids)``, so work split across
    frames or workers never depends on scheduling.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")

    def stream(self, *ids: int) -> np.random.Generator:
        key = np.random.SeedSequence([self.seed, *[int(i) for i in ids]])
        return np.random.Generator(np.random.Philox(key))
