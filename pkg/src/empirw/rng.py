"""Counter-based random number streams for reproducible parallel Monte Carlo.

Every replica draws from its own Philox stream keyed by a structured path
``(master_seed, *path)``.  Streams are independent of scheduling order: replica
k of horizon h always sees the same numbers no matter which worker runs it or
in which order the replicas complete.
"""
from __future__ import annotations

import numpy as np


def seed_sequence(master_seed: int, *path: int) -> np.random.SeedSequence:
    """SeedSequence for a node of the stream tree addressed by integer path."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Philox generator for ``(master_seed, *path)``.

    Philox is counter-based, so distinct paths give statistically independent
    streams and the mapping path -> stream is pure.
    """
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, *path)))


def substreams(ss: np.random.SeedSequence, n: int) -> list[np.random.Generator]:
    """Split a SeedSequence into n independent Philox generators."""
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(n)]
