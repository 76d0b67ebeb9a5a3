"""Counter-based randomness.

All random draws go through the Philox counter-based generator from numpy.
A stream is keyed by a 64-bit seed; draw ``k`` of a stream is a pure
function of ``(seed, k)``, so any prefix of a stream is reproducible without
replaying the rest and sample ``j`` of an experiment can be regenerated in
isolation from ``derive_seed(master_seed, j)``.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One round of the SplitMix64 finalizer on a 64-bit integer."""
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, index):
    """Per-sample seed: ``master_seed XOR splitmix64(index)``."""
    return (int(master_seed) & MASK64) ^ splitmix64(index)


def philox(seed):
    return np.random.Philox(key=int(seed) & MASK64)


def raw_stream(seed, count):
    """First ``count`` raw 64-bit outputs of the Philox stream keyed by ``seed``."""
    return philox(seed).random_raw(count)


def rademacher(seed, count):
    """``count`` independent signs in {-1, +1}; sign ``k`` is the top bit of raw draw ``k``."""
    raw = raw_stream(seed, count)
    top = (raw >> np.uint64(63)).astype(np.int8)
    return (2 * top - 1).astype(np.int8)


def normal_generator(seed):
    return np.random.Generator(philox(seed))
