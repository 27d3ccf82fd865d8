"""Group taste aggregation over authorship probabilities.

The compatibility of a photo with a user group is the plain sum of the
per-user authorship probabilities; sorting an item's photos by it yields
the group's preferred ordering, whose first element is the single photo
that best represents the group.  Matched groups of known users also give
cold-start users an explanation.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, FeatureStore
from .model import ElvisModel, predict_scores


def compatibility(model: ElvisModel, user_ids, photo_id: str, store: FeatureStore) -> float:
    """Sum of authorship probabilities of one photo over a user group."""
    users = sorted(set(user_ids))
    if not users:
        raise ValueError("empty user group")
    pairs = [(model.user_index(u), photo_id) for u in users]
    return float(np.sum(predict_scores(model, pairs, store)))


def mean_compatibility(model: ElvisModel, user_ids, photo_id: str, store: FeatureStore) -> float:
    """Group compatibility divided by group size, for cross-group comparison.

    Induces the same ordering as the raw sum within one group.
    """
    users = set(user_ids)
    return compatibility(model, users, photo_id, store) / len(users)


def rank_for_group(model: ElvisModel, user_ids, item_id: str, corpus: Corpus,
                   store: FeatureStore) -> list:
    """An item's photos sorted by group compatibility, best first.

    Returns (photo_id, phi) tuples; ties break on ascending photo id.
    """
    photos = corpus.photos_of_item(item_id)
    if not photos:
        raise ValueError(f"item {item_id!r} has no photos in the corpus")
    users = sorted(set(user_ids))
    if not users:
        raise ValueError("empty user group")
    indices = [model.user_index(u) for u in users]
    phis = []
    for pid in sorted(photos):
        scores = predict_scores(model, [(idx, pid) for idx in indices], store)
        phis.append((pid, float(np.sum(scores))))
    phis.sort(key=lambda t: (-t[1], t[0]))
    return phis


def cold_start_explain(model: ElvisModel, matched_users, item_id: str, corpus: Corpus,
                       store: FeatureStore, k: int) -> list:
    """Top-k photos of an item for a matched group of known users.

    The matched group stands in for a user without history: photos the
    group would most plausibly have taken double as the explanation for
    the newcomer.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return rank_for_group(model, matched_users, item_id, corpus, store)[:k]


def users_rating_below(corpus: Corpus, item_id: str, threshold: int) -> list:
    """Users with a rated review of the item strictly below the threshold."""
    users = {
        rev.user_id
        for rev in corpus.reviews
        if rev.item_id == item_id and rev.rating is not None and rev.rating < threshold
    }
    return sorted(users)
