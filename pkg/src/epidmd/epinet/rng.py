"""Counter-based random streams.

Every draw in a simulation comes from a Philox4x64 generator keyed by
``SeedSequence(seed, spawn_key=(purpose, day, index))``.  A stream therefore
depends only on the run seed, what it is used for, the simulated day and the
farm or edge index, never on which thread consumed it or in what order.
"""

from __future__ import annotations

import numpy as np

NETWORK = 0
CONTACTS = 1
SEED_OUTBREAK = 2
SHIPMENT = 3
ARRIVAL = 4
DISEASE = 5
RESAMPLE = 6

_MASK64 = (1 << 64) - 1


def substream(seed: int, purpose: int, day: int = 0, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(purpose), int(day), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(0 if rng is None else int(rng), NETWORK)
