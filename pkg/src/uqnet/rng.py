"""Deterministic random-stream derivation.

All randomness in a run flows from one master seed.  Every consumer
(fold shuffling, per-member weight init, per-step dropout masks, MC
inference passes, synthetic data) gets its own named stream derived
from the master seed plus a tag path, so adding or reordering one
consumer never perturbs the draws seen by another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive(master_seed: int, *tags: object) -> np.random.SeedSequence:
    """Seed sequence for the stream named by ``tags`` under ``master_seed``."""
    text = "/".join(str(t) for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *words])


def stream(master_seed: int, *tags: object) -> np.random.Generator:
    """Generator for the stream named by ``tags`` under ``master_seed``."""
    return np.random.default_rng(derive(master_seed, *tags))


def as_generator(seed) -> np.random.Generator:
    """Coerce an int seed or an existing Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
