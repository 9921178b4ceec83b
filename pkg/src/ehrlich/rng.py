"""Counter-based random streams.

All randomness in the package flows through named Philox substreams so
that every artifact (transition matrix, motif draw, GA step, proposal
batch) is reproducible in isolation: regenerating one artifact never
consumes state needed by another.

A stream is addressed by a root seed plus an integer path. The path is
fed to ``numpy.random.SeedSequence`` as the spawn key, which guarantees
independent streams for distinct paths under the same root.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, Sequence[int]]

# Stream ids for per-instance artifacts.
STREAM_MATRIX = 0
STREAM_PERMUTATION = 1
STREAM_MOTIFS = 2
STREAM_OFFSETS = 3
STREAM_INITIAL = 4

# Top-level domains keeping solver streams disjoint from instance streams.
DOMAIN_INSTANCE = 0
DOMAIN_GA = 1
DOMAIN_LLOME = 2
DOMAIN_PROPOSER = 3


def seed_path(seed: SeedLike, *path: int) -> tuple[int, ...]:
    """Flatten ``seed`` (an int or an (entropy, *ids) tuple) plus ``path``."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed), *(int(p) for p in path))
    return (*(int(p) for p in seed), *(int(p) for p in path))


def substream(seed: SeedLike, *path: int) -> np.random.Generator:
    """Philox generator for the named substream ``(seed, *path)``."""
    flat = seed_path(seed, *path)
    entropy, key = flat[0], flat[1:]
    if entropy < 0:
        raise ValueError(f"seed must be non-negative, got {entropy}")
    seq = np.random.SeedSequence(entropy=entropy, spawn_key=key)
    return np.random.Generator(np.random.Philox(seed=seq))
