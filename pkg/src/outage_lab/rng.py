"""Counter-based random streams.

Every stream is addressed by ``(seed, *key)``; the generator for a key never
depends on which other streams were drawn before it, so work can be split
across any number of workers without changing a single bit of output.
"""

import numpy as np

# Samples per stream in the batched samplers. Changing it changes the output.
CHUNK = 1 << 16


def stream(seed, *key):
    """Philox generator for the stream ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunks(n, size=CHUNK):
    """Yield ``(index, start, stop)`` for fixed-size chunks covering ``range(n)``."""
    for idx, start in enumerate(range(0, n, size)):
        yield idx, start, min(start + size, n)
