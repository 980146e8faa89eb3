"""Splittable seeds for replicate-level randomness.

Every stochastic quantity in a run flows from one master seed. Replicate m of
a test, outer replication r of a study, unit i inside replicate m: each gets
its own 64-bit seed from `derive_seed(master, *keys)`, so replicates are
independent of each other and of the order (and thread) they run in.

Mixing function: SplitMix64. For each key k the state z is advanced by the
golden gamma, xor'ed with k, then passed through the SplitMix64 finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  mod 2^64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB  mod 2^64
    z =  z ^ (z >> 31)

The result seeds `numpy.random.default_rng`.
"""

from __future__ import annotations


_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *keys: int) -> int:
    """Fold `keys` into `master` and return a 64-bit child seed."""
    if master < 0:
        raise ValueError(f"seed must be non-negative, got {master}")
    z = _mix64(((master & _MASK64) + _GOLDEN_GAMMA) & _MASK64)
    for k in keys:
        z = _mix64(((z + _GOLDEN_GAMMA) & _MASK64) ^ (int(k) & _MASK64))
    return z

