"""Counter-based SplitMix64 hashing.

Every random decision in a realization is a pure function of ``(seed, counter)``
where the counter identifies the decision (for squares: their breadth-first
index in the complete M^2-ary tree).  This makes any subtree reproducible
regardless of traversal order, batch shape or worker count.
"""

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TRIAL_GAMMA = 0xD1B54A32D192ED03


def mix64(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64_int(z: int) -> int:
    """Scalar SplitMix64 finalizer on a Python int."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int) -> int:
    """Scramble a user seed into the SplitMix64 stream origin."""
    return mix64_int(seed & _MASK)


def uniforms(key, counters):
    """Uniform [0, 1) doubles for ``counters`` in the stream ``key``.

    ``key`` is either a scalar (one stream) or an array broadcastable to
    ``counters`` (one stream per element).  Output number ``k`` of a plain
    SplitMix64 generator started at ``key`` is returned for counter ``k``.
    """
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.asarray(key, dtype=np.uint64) + (counters + np.uint64(1)) * np.uint64(GAMMA)
        z = mix64(z)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def trial_seed(base_seed: int, trial: int) -> int:
    """Seed of trial ``trial`` in a campaign with ``base_seed``."""
    return mix64_int((base_seed & _MASK) + (trial + 1) * _TRIAL_GAMMA)
