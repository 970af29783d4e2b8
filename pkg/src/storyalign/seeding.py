"""Deterministic random generators derived from a seed plus string labels.

Every randomized operation derives its generator from (seed, chapter key,
operation label) so outputs never depend on chapter iteration order or on
worker scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_rng(seed: int, *labels: str) -> np.random.Generator:
    """Generator whose stream depends only on the seed and the labels."""
    material = "\x1f".join(labels).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    words = [int.from_bytes(digest[k : k + 8], "big") for k in range(0, 32, 8)]
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *words])
