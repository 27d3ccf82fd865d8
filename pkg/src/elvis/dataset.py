"""Dataset construction: filtering, hold-out split, negative sampling.

The pipeline turns a corpus into labeled training pairs and test cases:

1. keep only reviews with photos, and only the most recent review per
   (user, item) pair;
2. hold out one review per multi-review user for testing;
3. for every training positive (u, f) of item it, sample 10 negatives
   from the same item and 10 from other items, and repeat the positive
   20 times so the set stays balanced;
4. for every test positive, the candidate set is the positive plus all
   training photos of its item taken by other users.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import Corpus, Review

POSITIVE = "positive"
SAME_ITEM_NEGATIVE = "same_item_negative"
OTHER_ITEM_NEGATIVE = "other_item_negative"
_ORIGINS = (POSITIVE, SAME_ITEM_NEGATIVE, OTHER_ITEM_NEGATIVE)


@dataclass(frozen=True)
class LabeledPair:
    user_id: str
    photo_id: str
    label: int
    origin: str

    def __post_init__(self):
        if self.origin not in _ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if (self.label == 1) != (self.origin == POSITIVE):
            raise ValueError("label 1 must pair with origin 'positive'")


@dataclass(frozen=True)
class PositiveGroup:
    """One original positive with the samples generated from it."""

    user_id: str
    photo_id: str
    item_id: str
    positive_copies: int
    same_item_negatives: tuple[str, ...]
    other_item_negatives: tuple[str, ...]


@dataclass(frozen=True)
class TrainSet:
    pairs: tuple[LabeledPair, ...]
    seed: int
    provenance: tuple[PositiveGroup, ...]


@dataclass(frozen=True)
class TestCase:
    """One held-out positive photo with its item-restricted candidates."""

    user_id: str
    positive_photo_id: str
    item_id: str
    candidate_photo_ids: tuple[str, ...]
    user_train_photo_count: int

    def __post_init__(self):
        if self.positive_photo_id not in self.candidate_photo_ids:
            raise ValueError("positive photo missing from candidate set")


def filter_corpus(corpus: Corpus) -> Corpus:
    """Drop photo-less reviews, then dedup (user, item) to the most recent.

    Timestamp ties keep the lexicographically largest review_id, so the
    result never depends on input order.
    """
    best: dict[tuple, Review] = {}
    for rev in corpus.reviews:
        if not rev.photo_ids:
            continue
        key = (rev.user_id, rev.item_id)
        cur = best.get(key)
        if cur is None or (rev.timestamp, rev.review_id) > (cur.timestamp, cur.review_id):
            best[key] = rev
    return Corpus(tuple(best.values()))


def split_holdout(corpus: Corpus, seed: int, policy: str = "random") -> tuple[Corpus, Corpus]:
    """Move one review per multi-review user into a test corpus.

    policy 'random' picks the held-out review uniformly with the seed;
    'recent' picks the one with the largest timestamp (review_id breaks
    ties).  Single-review users stay entirely in train.
    """
    if policy not in ("random", "recent"):
        raise ValueError(f"unknown holdout policy {policy!r}")
    rng = np.random.default_rng(seed)
    train_reviews: list[Review] = []
    test_reviews: list[Review] = []
    for user_id in sorted(corpus.users):
        revs = sorted(corpus.reviews_by_user[user_id], key=lambda r: r.review_id)
        if len(revs) < 2:
            train_reviews.extend(revs)
            continue
        if policy == "recent":
            held = max(revs, key=lambda r: (r.timestamp, r.review_id))
        else:
            held = revs[int(rng.integers(len(revs)))]
        for rev in revs:
            (test_reviews if rev is held else train_reviews).append(rev)
    return Corpus(tuple(train_reviews)), Corpus(tuple(test_reviews))


def _sample_without_replacement(pool: list, k: int, rng: np.random.Generator) -> list:
    if k >= len(pool):
        return list(pool)
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in sorted(idx)]


def build_train_set(
    train: Corpus,
    seed: int,
    negatives_same_item: int = 10,
    negatives_other_item: int = 10,
) -> TrainSet:
    """Generate the balanced, oversampled training pairs.

    For each positive (u, f) of item it the negatives are drawn without
    replacement: `negatives_same_item` photos of it by other authors and
    `negatives_other_item` photos of other items by other authors.  When
    one pool is too small the shortfall moves to the other pool; when
    both run dry the positive is repeated once per negative actually
    drawn, which keeps the 50/50 balance.
    """
    rng = np.random.default_rng(seed)
    all_photos = frozenset(train.author_of)
    target = negatives_same_item + negatives_other_item
    if target <= 0:
        raise ValueError("need a positive number of negatives per positive pair")

    pairs: list[LabeledPair] = []
    groups: list[PositiveGroup] = []
    total_negatives = 0
    for rev in train.reviews:
        user_id, item_id = rev.user_id, rev.item_id
        user_photos = frozenset(train.photos_of_user(user_id))
        item_photos = frozenset(train.photos_of_item(item_id))
        same_pool = sorted(item_photos - user_photos)
        other_pool = sorted(all_photos - item_photos - user_photos)
        for photo_id in rev.photo_ids:
            n_same_first = min(negatives_same_item, len(same_pool))
            same_negs = _sample_without_replacement(same_pool, n_same_first, rng)

            n_other = min(target - len(same_negs), len(other_pool))
            other_negs = _sample_without_replacement(other_pool, n_other, rng)
            if len(same_negs) + len(other_negs) < target and len(same_negs) < len(same_pool):
                # other pool ran dry too: push the remainder back to same item
                n_same = min(target - len(other_negs), len(same_pool))
                same_negs = _sample_without_replacement(same_pool, n_same, rng)

            copies = len(same_negs) + len(other_negs)
            total_negatives += copies
            groups.append(
                PositiveGroup(
                    user_id=user_id,
                    photo_id=photo_id,
                    item_id=item_id,
                    positive_copies=copies,
                    same_item_negatives=tuple(same_negs),
                    other_item_negatives=tuple(other_negs),
                )
            )
            pairs.extend(
                LabeledPair(user_id, photo_id, 1, POSITIVE) for _ in range(copies)
            )
            pairs.extend(
                LabeledPair(user_id, p, 0, SAME_ITEM_NEGATIVE) for p in same_negs
            )
            pairs.extend(
                LabeledPair(user_id, p, 0, OTHER_ITEM_NEGATIVE) for p in other_negs
            )

    if groups and total_negatives == 0:
        raise ValueError("no negative pool exists")

    order = rng.permutation(len(pairs))
    shuffled = tuple(pairs[i] for i in order)
    return TrainSet(pairs=shuffled, seed=seed, provenance=tuple(groups))


def build_test_cases(train: Corpus, test: Corpus) -> list[TestCase]:
    """One TestCase per held-out positive (u, f).

    Candidates are the positive itself plus every training photo of its
    item whose author is not u, sorted for deterministic downstream use.
    """
    cases = []
    for rev in test.reviews:
        user_id, item_id = rev.user_id, rev.item_id
        others = [
            p for p in train.photos_of_item(item_id) if train.author_of[p] != user_id
        ]
        train_photo_count = len(train.photos_of_user(user_id))
        for photo_id in rev.photo_ids:
            candidates = tuple(sorted(set(others) | {photo_id}))
            cases.append(
                TestCase(
                    user_id=user_id,
                    positive_photo_id=photo_id,
                    item_id=item_id,
                    candidate_photo_ids=candidates,
                    user_train_photo_count=train_photo_count,
                )
            )
    return cases


def make_dev_split(train: Corpus, seed: int, policy: str = "random") -> tuple[Corpus, list[TestCase]]:
    """Re-run the hold-out procedure inside the training corpus.

    Returns the reduced training corpus and development test cases, used
    for meta-parameter selection without touching the real test data.
    """
    subtrain, devtest = split_holdout(train, seed, policy=policy)
    return subtrain, build_test_cases(subtrain, devtest)


def write_train_set(train_set: TrainSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in train_set.pairs:
            fh.write(f"{pair.user_id}\t{pair.photo_id}\t{pair.label}\t{pair.origin}\n")


def load_train_set(path, seed: int = 0) -> TrainSet:
    """Read pairs back from disk.  Provenance is not stored in the file."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            user_id, photo_id, label_str, origin = parts
            if label_str not in ("0", "1"):
                raise ValueError(f"line {lineno}: bad label {label_str!r}")
            pairs.append(LabeledPair(user_id, photo_id, int(label_str), origin))
    return TrainSet(pairs=tuple(pairs), seed=seed, provenance=())


def write_test_cases(cases: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(
                f"{case.user_id}\t{case.positive_photo_id}\t{case.item_id}\t"
                f"{','.join(case.candidate_photo_ids)}\n"
            )


def load_test_cases(path, train: Optional[Corpus] = None) -> list[TestCase]:
    """Read test cases; user_train_photo_count is recomputed from `train`.

    Without a training corpus the count defaults to 0, which only affects
    user-level filtering and stratification.
    """
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            user_id, positive_id, item_id, cand_str = parts
            candidates = tuple(c for c in cand_str.split(",") if c)
            count = len(train.photos_of_user(user_id)) if train is not None else 0
            cases.append(
                TestCase(
                    user_id=user_id,
                    positive_photo_id=positive_id,
                    item_id=item_id,
                    candidate_photo_ids=candidates,
                    user_train_photo_count=count,
                )
            )
    return cases
