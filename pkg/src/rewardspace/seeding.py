"""Deterministic random-stream management.

Every stochastic routine takes a ``seed`` argument that may be an int, a
``numpy.random.SeedSequence`` or an existing ``Generator``.  Sub-streams are
always derived by spawning in a fixed index order, so results never depend on
scheduling.
"""

from __future__ import annotations

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Coerce an int / SeedSequence / Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_generators(seed, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent generators from one source, stably by index."""
    if isinstance(seed, np.random.Generator):
        return seed.spawn(n)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def cell_seed_sequence(master_seed: int, *indices: int) -> np.random.SeedSequence:
    """Stable sub-seed for an experiment cell (replication, sweep point, ...).

    The stream depends only on the master seed and the integer coordinates,
    never on what else runs in the same session.
    """
    return np.random.SeedSequence([int(master_seed), *[int(i) for i in indices]])
