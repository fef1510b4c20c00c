"""Deterministic counter-based random streams.

Every sampling entry point takes a seed key ``(seed, id1, id2, ...)`` and
derives an independent Philox substream from it, so parallel replicas never
share state and any single replica can be replayed in isolation.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for substream ``key`` of master seed ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def stream_label(seed: int, *key: int) -> str:
    """Printable identifier recorded in reports, e.g. ``"7:3:0"``."""
    return ":".join(str(int(x)) for x in (seed, *key))
