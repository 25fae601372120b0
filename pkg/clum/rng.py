from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for ``seed``, optionally keyed to a substream.

    Identical ``(seed, key)`` pairs always yield identical streams, which is
    what makes per-worker and per-cell draws reproducible.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def spawn(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent child generators derived from ``rng``'s seed sequence."""
    return rng.spawn(count)
