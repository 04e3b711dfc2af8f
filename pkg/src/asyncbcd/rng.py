"""Seeded random streams.

Every random quantity comes from a PCG64 generator keyed by a numpy
``SeedSequence``: the user seed is the entropy and a tuple of small
integers (a stream tag plus agent/link ids) is the spawn key.  Streams for
different links or agents are therefore independent and do not depend on
the order in which they are drawn.
"""

import numpy as np

# stream tags
PROBLEM_MATRIX = 0
PROBLEM_LINEAR = 1
PROBLEM_DELAYS = 2
PROBLEM_UPDATES = 3
LINK = 10
AGENT = 11

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
