"""Counter-based random streams.

Generator family: numpy's Philox-4x64-10 bit generator (stable across numpy
releases per NEP 19).  A stream is identified by

* key   = ``(master_seed, purpose)`` -- two 64-bit words,
* counter high words = ``(id0, id1)`` -- two 64-bit words naming the stream,

and always starts at counter low words ``(0, 0)``.  Distinct streams therefore
never overlap unless one of them draws more than 2**128 blocks, and any stream
can be regenerated in isolation from ``(master_seed, purpose, id0, id1)`` alone,
independently of how many other streams exist or in which order they run.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# purpose tags (second key word)
INSTANCE = 1
ROLLOUT = 2
NOISE = 3
BATTERY = 4


def pack(hi, lo):
    """Pack two non-negative 32-bit indices into one 64-bit counter word."""
    if not (0 <= hi < 1 << 32 and 0 <= lo < 1 << 32):
        raise ValueError("stream indices must fit in 32 bits")
    return (hi << 32) | lo


def stream(master_seed, purpose, id0=0, id1=0):
    """A ``numpy.random.Generator`` over the stream ``(master_seed, purpose, id0, id1)``."""
    key = np.array([int(master_seed) & MASK64, purpose], dtype=np.uint64)
    counter = np.array([0, 0, id0 & MASK64, id1 & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
