"""Reproducible random streams.

All randomness flows through :class:`numpy.random.Generator` objects backed by
the counter-based Philox4x64-10 bit generator.  Stream ``i`` of master seed
``seed`` is ``Philox(SeedSequence(seed, spawn_key=(i,)))``; this derivation is
part of the output contract and must not change between versions.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "Philox4x64-10/SeedSequence"


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Generator for ``seed``, optionally the ``stream``-th derived substream."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if stream is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def worker_streams(seed: int, count: int) -> list[np.random.Generator]:
    return [make_rng(seed, i) for i in range(count)]


def split_counts(total: int, parts: int) -> list[int]:
    """Split ``total`` samples over ``parts`` streams; earlier streams take the remainder."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]
