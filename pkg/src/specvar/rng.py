"""Counter-based random streams.

Every Monte Carlo routine derives its randomness from ``stream(seed, *key)``
where the key components identify the unit of work (sample index, generator
index, draw index, class id, ...).  Streams for distinct keys are
independent and a given key always yields the same stream, so results are
bit-identical no matter how the work is split across threads or runs.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one unit of work.

    Philox is counter-based; SeedSequence hashes (seed, *key) into its key,
    so any number of integer components is accepted without packing limits.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(int(k) & 0xFFFFFFFFFFFFFFFF for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
