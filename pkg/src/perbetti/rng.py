"""Reproducible random streams.

Every stream is a Philox counter-based generator keyed by a master seed and a
path of integers::

    stream(master, KIND, n_index, replication, SUBSTREAM)

The path is used as the ``spawn_key`` of a :class:`numpy.random.SeedSequence`,
so a stream depends only on ``(master, path)`` and never on which worker
draws it or in which order replications are scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np

# substream identifiers used inside samplers
HIDDEN = 0
COORDS = 1
PROPOSALS = 2
INITIAL = 3


def stream(seed, *path: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        if path:
            raise ValueError("cannot derive a keyed stream from a live generator")
        return seed
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed, *path: int) -> int:
    """A 63-bit integer seed derived from ``(seed, path)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) & ((1 << 63) - 1)


def tag_id(tag: str) -> int:
    """Stable 32-bit integer for a string label (e.g. a process tag)."""
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:4], "little")
