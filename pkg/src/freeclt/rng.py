"""Splittable deterministic random streams.

A stream is addressed by a root seed plus a derivation path of labels
(replica ids, purpose tags, indices).  Identical (seed, path) always yields
identical draws; distinct paths yield statistically independent streams.
Built on numpy's SeedSequence spawn keys, which are stable across platforms.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np


def _encode(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    raise TypeError(f"stream path labels must be int or str, got {type(label)!r}")


@dataclass(frozen=True)
class RngStream:
    root: int
    path: tuple = field(default_factory=tuple)

    def child(self, *labels) -> "RngStream":
        return RngStream(self.root, self.path + tuple(_encode(l) for l in labels))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.root, spawn_key=self.path))
