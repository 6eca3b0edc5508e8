"""Counter-based random streams keyed by integer tuples.

``stream(seed, *key)`` depends only on (seed, key), so any task can build
its own generator and results do not depend on scheduling or thread count.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
