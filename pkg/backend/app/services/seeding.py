"""Random streams and replication seeds.

Every stream is numpy's PCG64 (``np.random.default_rng``). Replication seeds
are derived with ``SeedSequence`` spawn keys so that a replication's stream
depends only on the master seed, the market cell and the replication index,
never on which worker ran it.
"""

from __future__ import annotations

import numpy as np

# spawn keys must be non-negative; shift the signed imbalance into range
_K_OFFSET = 2**31


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def derive_seed(master_seed: int, *key: int) -> int:
    """Mix ``master_seed`` with a non-negative integer key into a 64-bit seed."""
    state = np.random.SeedSequence(master_seed, spawn_key=tuple(key)).generate_state(
        2, dtype=np.uint32
    )
    return int(state[0]) << 32 | int(state[1])


def cell_key(n: int, k: int, d: int) -> tuple[int, int, int]:
    return (n, k + _K_OFFSET, d)


def replication_seed(master_seed: int, n: int, k: int, d: int, rep: int) -> int:
    """Seed of replication ``rep`` of market cell ``(n, k, d)``.

    Distinct cells and distinct replication indices land in separate spawn
    domains, so no two replications of a sweep share a stream.
    """
    return derive_seed(master_seed, *cell_key(n, k, d), rep)


def split(seed: int, parts: int) -> list[np.random.Generator]:
    """Independent child generators of one seed, in a fixed order."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(parts)]
