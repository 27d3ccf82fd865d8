"""Comparison methods: uniform random scores and centroid distance.

Both ignore the user entirely.  Random draws i.i.d. uniform scores from a
seed; centroid scores an item's photos by closeness to the mean of their
feature vectors (higher score = closer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FeatureStore


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random", "centroid"):
            raise ValueError(f"unknown baseline {self.kind!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def random_scores(candidates, seed) -> np.ndarray:
    """I.i.d. uniform [0, 1) score per candidate, fixed by the seed."""
    if len(candidates) == 0:
        raise ValueError("empty candidate list")
    rng = np.random.default_rng(seed)
    return rng.random(len(candidates))


def centroid_scores(item_photo_ids, store: FeatureStore) -> np.ndarray:
    """Negated euclidean distance to the centroid of the given photos.

    Negation turns ascending distance into descending score, giving the
    same ordering as ranking by inverse distance without dividing by zero
    when a photo sits exactly on the centroid.
    """
    if len(item_photo_ids) == 0:
        raise ValueError("empty photo list")
    vectors = np.stack([store[pid] for pid in item_photo_ids]).astype(np.float64)
    centroid = vectors.mean(axis=0)
    return -np.linalg.norm(vectors - centroid, axis=1)
