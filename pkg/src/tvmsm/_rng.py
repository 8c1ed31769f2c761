"""Deterministic seed derivation.

Every stochastic entry point takes a plain integer seed. Internal components
derive independent child streams from (seed, *path) so that results do not
depend on execution order or worker count. Path elements are small
non-negative integers; each caller documents its own layout.
"""
from __future__ import annotations

import numpy as np


def seed_sequence(seed: int, *path: int) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.SeedSequence([int(seed), *[int(p) for p in path]])


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path)."""
    return np.random.default_rng(seed_sequence(seed, *path))


def derive_seed(seed: int, *path: int) -> int:
    """Fold (seed, *path) into a fresh integer seed for a child component."""
    return int(seed_sequence(seed, *path).generate_state(1, np.uint64)[0])
