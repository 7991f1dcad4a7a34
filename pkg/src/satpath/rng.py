"""Deterministic random-stream derivation.

All randomness in the package flows from a single 64-bit seed.  Substreams
are derived with ``numpy.random.SeedSequence(seed, spawn_key=key)``, so a
worker indexed by ``key`` always sees the same stream regardless of how many
other workers exist or in which order they run.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
