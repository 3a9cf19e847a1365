"""Reproducible RNG substreams.

All randomness in the package flows from a single integer seed.  Independent
work items (dataset draws, restarts, trials) get their own substream derived
from the seed plus an index path, so results are identical whether the items
run sequentially or in parallel.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for substream ``path`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in path))
    return np.random.Generator(np.random.Philox(ss))
