"""Reproducible random streams.

All randomness in the package flows through numpy's Philox generator, a
counter-based generator keyed by a 64-bit master seed.  Independent
substreams are obtained by jumping the counter, so results are identical
for any worker layout: stream(seed, k) is the k-th substream no matter
which thread consumes it.
"""

import numpy as np

#: substream channels used by the event-log generator
CHANNEL_TIMES = 0
CHANNEL_ANGLES = 1
CHANNEL_DIAMETERS = 2
CHANNEL_NOISE = 3

#: substream spacing between Monte Carlo replicas
REPLICA_STRIDE = 8


def stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Independent substream ``index`` of the Philox generator keyed by ``master_seed``."""
    bg = np.random.Philox(key=np.uint64(master_seed))
    if index:
        bg = bg.jumped(index)
    return np.random.Generator(bg)


def replica_stream(master_seed: int, replica: int, channel: int = CHANNEL_NOISE) -> np.random.Generator:
    """Stream for Monte Carlo replica ``replica``, one channel per purpose."""
    return stream(master_seed, REPLICA_STRIDE * replica + channel)
