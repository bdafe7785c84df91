"""
Per-replication random streams

A replication seed is SplitMix64 applied to master_seed + (index + 1) * GOLDEN_GAMMA
(mod 2**64). Each replication then owns a numpy Generator over PCG64 seeded with
that value, so replications can run in any order or in parallel without sharing
a stream.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value):
    """One SplitMix64 finalization step on a 64-bit integer"""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, replication_index):
    """Seed of replication `replication_index` under `master_seed`"""
    if replication_index < 0:
        raise ValueError(f"replication index must be nonnegative, got {replication_index}")
    return splitmix64((int(master_seed) + (replication_index + 1) * GOLDEN_GAMMA) & MASK64)


def replication_rng(master_seed, replication_index):
    """Independent generator for one replication"""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, replication_index)))
