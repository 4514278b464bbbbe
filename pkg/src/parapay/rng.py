"""Deterministic random stream derivation.

All randomness in the package flows through generators built here. A
stream is identified by a root seed plus an integer key path, so any
unit of work (a run, a worker chunk, a scenario) can rebuild its own
generator independently of execution order or worker count.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator identified by ``seed`` and an integer key path.

    Identical (seed, key) pairs always yield identical draws; distinct
    key paths yield statistically independent streams.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))
