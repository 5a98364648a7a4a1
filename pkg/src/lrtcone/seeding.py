"""Deterministic derivation of independent RNG streams.

Every stochastic routine in this package draws from a stream keyed by
(master seed, stream name, index).  Streams are independent and do not
depend on execution order or worker count, so parallel runs reproduce
serial runs bit for bit.
"""

import zlib

import numpy as np


def stream_id(name: str) -> int:
    """Stable 32-bit id for a stream name (never Python's salted hash)."""
    return zlib.crc32(name.encode("utf-8"))


def child_seed(master_seed: int, *key: int | str) -> np.random.SeedSequence:
    parts = tuple(stream_id(k) if isinstance(k, str) else int(k) for k in key)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=parts)


def child_rng(master_seed: int, *key: int | str) -> np.random.Generator:
    """Generator for the stream keyed by (master_seed, *key)."""
    return np.random.default_rng(child_seed(master_seed, *key))


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
