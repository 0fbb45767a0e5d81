"""Named random substreams derived from one master seed.

Every consumer of randomness asks for its own stream, so changing how many
numbers one component draws never shifts another component's draws.
"""
from __future__ import annotations

import numpy as np

STREAMS = {"train": 0, "explore": 1, "attack": 2, "profile": 3}


def _key(master: int, name: str, extra) -> list[int]:
    if name not in STREAMS:
        raise KeyError(f"unknown substream {name!r}; known: {sorted(STREAMS)}")
    # the length word keeps (m, s) and (m, s, 0) apart: SeedSequence ignores trailing zeros
    return [int(master), STREAMS[name], len(extra), *(int(x) for x in extra)]


def substream(master: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for stream ``name`` of ``master``, optionally split further by ``extra`` indices."""
    return np.random.default_rng(_key(master, name, extra))


def substream_seed(master: int, name: str, *extra: int) -> int:
    """A 63-bit integer seed for APIs that take plain integers."""
    return int(substream(master, name, *extra).integers(2 ** 63))
