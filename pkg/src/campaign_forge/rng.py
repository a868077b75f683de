"""Named, counter-based random streams.

Every failure source draws from its own Philox stream keyed by
``(seed, name)``. Adding a new source therefore never shifts the draws of an
existing one, which keeps paired policy comparisons paired.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAM_NAMES = ("node-failure", "oom", "port", "startup", "vetting", "noise")


def stream_key(seed: int, name: str) -> int:
    """128-bit Philox key derived from the seed and stream name."""
    if not name:
        raise ValueError("stream name must be non-empty")
    digest = hashlib.sha256(f"{int(seed)}/{name}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def named_stream(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, name)))


class StreamSet:
    """Lazily created generators, one per stream name."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            gen = self._streams[name] = named_stream(self.seed, name)
        return gen
