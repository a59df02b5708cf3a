"""Seeded random number generation.

All randomness in the package goes through :func:`make_rng`, which returns a
NumPy ``Generator`` backed by the counter-based Philox-4x64 bit generator.
Normal variates use NumPy's ziggurat sampler. Child seeds for ensemble members
come from ``SeedSequence(master).spawn(n)``: member ``i`` always receives the
``i``-th spawned sequence, so results do not depend on scheduling.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed generator for an int seed or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(master: int, n: int) -> list[np.random.SeedSequence]:
    """Derive ``n`` independent child seed sequences from ``master``."""
    return np.random.SeedSequence(int(master)).spawn(int(n))
