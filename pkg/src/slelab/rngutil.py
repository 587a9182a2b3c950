"""Deterministic random-stream derivation.

Scalar paths draw from a Philox stream keyed by (seed, path_index); ensemble
chunks are keyed by (seed, chunk_index).  Both derivations use SeedSequence
spawn keys, so results are reproducible from the seed alone and independent
of scheduling or worker count.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["path_rng", "chunk_rng", "default_seed", "ENSEMBLE_CHUNK"]

# Fixed ensemble chunk width; workers always process whole chunks.
ENSEMBLE_CHUNK = 2048

_SEED_ENV = "SLELAB_SEED"


def default_seed() -> int:
    return int(os.environ.get(_SEED_ENV, "0"))


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_index,))
    return np.random.Generator(np.random.Philox(ss))


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0xC0FFEE, chunk_index))
    return np.random.Generator(np.random.Philox(ss))
