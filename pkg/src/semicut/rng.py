"""Seeded random streams.

Every random draw in the package goes through a Philox generator whose key is
derived from ``(seed, label path)``.  Labels are hashed with CRC32 so that the
stream for, say, ``("instance", "cut")`` does not depend on how many other
streams were created before it.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

SEED_ENV = "SEMICUT_SEED"
DEFAULT_SEED = 0


def default_seed() -> int:
    """Seed from the environment, falling back to 0."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    return int(raw)


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for the labelled phase of a seeded run."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    words = [_label_word(lab) for lab in labels]
    ss = np.random.SeedSequence(entropy, spawn_key=tuple(words))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *labels) -> int:
    """Derive a 63-bit integer seed for a nested component."""
    g = substream(seed, "child-seed", *labels)
    return int(g.integers(0, 2**63 - 1))
