"""Seeded random streams.

Every draw is keyed by ``(master_seed, stream_id, draw_index)`` so results do
not depend on how work is split across workers.
"""

import hashlib

import numpy as np


def stream_key(stream_id):
    if isinstance(stream_id, (int, np.integer)):
        return int(stream_id)
    digest = hashlib.blake2b(str(stream_id).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(master_seed, stream_id="default", draw_index=0):
    """Return a Generator for one draw of one named stream."""
    seq = np.random.SeedSequence([int(master_seed), stream_key(stream_id), int(draw_index)])
    return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if rng is None else rng)


def hash_index(idx, seed=0, bits=16):
    """Deterministic integer hash of integer indices into ``[0, 2**bits)``.

    splitmix64 finalizer; used as an arbitrary but fixed test variable.
    """
    x = np.asarray(idx).astype(np.uint64) + np.uint64(seed * 0x9E3779B97F4A7C15 % 2**64)
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return (x >> np.uint64(64 - bits)).astype(np.int64)
