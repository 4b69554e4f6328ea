"""Deterministic named random substreams derived from a single run seed.

Every source of randomness in the package (parameter init, dropout masks,
epoch shuffling, synthetic data generation, splitting) draws from its own
named substream so components can be re-seeded independently without
perturbing each other.
"""

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator for the substream `name` of run seed `seed`."""
    tag = zlib.crc32(name.encode("utf8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
