"""Immutable review/photo corpus, feature store, and their file formats.

A corpus is the users/items/reviews/photos graph loaded from a reviews
file.  Photos are globally unique and single-authored: a photo id that
appears under two reviews is rejected, because authorship labels would
become ambiguous.
"""

from __future__ import annotations

import json
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FEATURE_MAGIC = b"ELVF"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class Review:
    """One user review of one item, with the photos attached to it."""

    review_id: str
    user_id: str
    item_id: str
    timestamp: int
    rating: Optional[int]
    photo_ids: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.photo_ids)) != len(self.photo_ids):
            raise ValueError(f"review {self.review_id}: duplicate photo ids")


@dataclass(frozen=True)
class Corpus:
    """Immutable snapshot of reviews plus every derived index.

    Reviews are kept sorted by review_id, so corpora built from the same
    records are equal regardless of input order.
    """

    reviews: tuple[Review, ...]
    users: frozenset[str] = field(init=False)
    items: frozenset[str] = field(init=False)
    photos_by_user: dict = field(init=False)
    photos_by_item: dict = field(init=False)
    photos_by_user_item: dict = field(init=False)
    author_of: dict = field(init=False)
    item_of: dict = field(init=False)
    reviews_by_user: dict = field(init=False)

    def __post_init__(self):
        reviews = tuple(sorted(self.reviews, key=lambda r: r.review_id))
        object.__setattr__(self, "reviews", reviews)

        seen_review_ids = set()
        author_of: dict[str, str] = {}
        item_of: dict[str, str] = {}
        photo_owner_review: dict[str, str] = {}
        photos_by_user: dict[str, list] = {}
        photos_by_item: dict[str, list] = {}
        photos_by_user_item: dict[tuple, list] = {}
        reviews_by_user: dict[str, list] = {}
        users = set()
        items = set()

        for rev in reviews:
            if rev.review_id in seen_review_ids:
                raise ValueError(f"duplicate review_id {rev.review_id!r}")
            seen_review_ids.add(rev.review_id)
            users.add(rev.user_id)
            items.add(rev.item_id)
            reviews_by_user.setdefault(rev.user_id, []).append(rev)
            photos_by_user.setdefault(rev.user_id, [])
            photos_by_item.setdefault(rev.item_id, [])
            photos_by_user_item.setdefault((rev.user_id, rev.item_id), [])
            for pid in rev.photo_ids:
                if pid in photo_owner_review:
                    raise ValueError(
                        f"photo {pid!r} owned by two reviews: "
                        f"{photo_owner_review[pid]!r} and {rev.review_id!r}"
                    )
                photo_owner_review[pid] = rev.review_id
                author_of[pid] = rev.user_id
                item_of[pid] = rev.item_id
                photos_by_user[rev.user_id].append(pid)
                photos_by_item[rev.item_id].append(pid)
                photos_by_user_item[(rev.user_id, rev.item_id)].append(pid)

        object.__setattr__(self, "users", frozenset(users))
        object.__setattr__(self, "items", frozenset(items))
        object.__setattr__(self, "photos_by_user", {u: tuple(v) for u, v in photos_by_user.items()})
        object.__setattr__(self, "photos_by_item", {i: tuple(v) for i, v in photos_by_item.items()})
        object.__setattr__(
            self, "photos_by_user_item", {k: tuple(v) for k, v in photos_by_user_item.items()}
        )
        object.__setattr__(self, "author_of", author_of)
        object.__setattr__(self, "item_of", item_of)
        object.__setattr__(self, "reviews_by_user", {u: tuple(v) for u, v in reviews_by_user.items()})

    @property
    def photo_ids(self) -> tuple[str, ...]:
        return tuple(self.author_of)

    def photos_of_user(self, user_id: str) -> tuple[str, ...]:
        return self.photos_by_user.get(user_id, ())

    def photos_of_item(self, item_id: str) -> tuple[str, ...]:
        return self.photos_by_item.get(item_id, ())

    def photos_of_user_item(self, user_id: str, item_id: str) -> tuple[str, ...]:
        return self.photos_by_user_item.get((user_id, item_id), ())

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.reviews == other.reviews

    def __hash__(self):
        return hash(self.reviews)


@dataclass
class FeatureStore:
    """photo_id -> fixed-length float32 feature vector."""

    dim: int
    vectors: dict

    def __getitem__(self, photo_id: str) -> np.ndarray:
        try:
            return self.vectors[photo_id]
        except KeyError:
            raise KeyError(f"no feature vector for photo {photo_id!r}") from None

    def __contains__(self, photo_id: str) -> bool:
        return photo_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class StatsReport:
    """Corpus totals plus the five count distributions."""

    num_users: int
    num_items: int
    num_photos: int
    num_reviews: int
    items_by_photo_count: dict
    items_by_review_count: dict
    reviews_by_photo_count: dict
    users_by_review_count: dict
    users_by_photo_count: dict


def _parse_review_line(line: str, lineno: int) -> Review:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 6:
        raise ValueError(f"line {lineno}: expected 6 tab-separated fields, got {len(parts)}")
    review_id, user_id, item_id, ts_str, rating_str, photos_str = parts
    if not review_id or not user_id or not item_id:
        raise ValueError(f"line {lineno}: empty id field")
    try:
        timestamp = int(ts_str)
    except ValueError:
        raise ValueError(f"line {lineno}: bad timestamp {ts_str!r}") from None
    if rating_str == "-":
        rating = None
    else:
        try:
            rating = int(rating_str)
        except ValueError:
            raise ValueError(f"line {lineno}: bad rating {rating_str!r}") from None
    photo_ids = tuple(p for p in photos_str.split(",") if p) if photos_str else ()
    try:
        return Review(review_id, user_id, item_id, timestamp, rating, photo_ids)
    except ValueError as exc:
        raise ValueError(f"line {lineno}: {exc}") from None


def load_reviews(path) -> Corpus:
    """Load a tab-separated reviews file into a Corpus.

    Line format: review_id, user_id, item_id, timestamp, rating or "-",
    comma-separated photo ids (possibly empty).
    """
    reviews = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            reviews.append(_parse_review_line(line, lineno))
    return Corpus(tuple(reviews))


def write_reviews(corpus: Corpus, path) -> None:
    """Write a Corpus back to the reviews file format (sorted by review_id)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rev in corpus.reviews:
            rating = "-" if rev.rating is None else str(rev.rating)
            fh.write(
                f"{rev.review_id}\t{rev.user_id}\t{rev.item_id}\t"
                f"{rev.timestamp}\t{rating}\t{','.join(rev.photo_ids)}\n"
            )


def _check_vector(photo_id: str, vec: np.ndarray, dim: int, seen: dict) -> None:
    if photo_id in seen:
        raise ValueError(f"duplicate photo_id {photo_id!r} in feature file")
    if vec.shape != (dim,):
        raise ValueError(
            f"photo {photo_id!r}: expected {dim} features, got {vec.shape[0]}"
        )
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"photo {photo_id!r}: non-finite feature value")


def _load_features_binary(path) -> FeatureStore:
    vectors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != FEATURE_MAGIC:
            raise ValueError(f"{path}: not a feature file (bad magic)")
        version, dim = struct.unpack("<II", header[4:12])
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported feature file version {version}")
        if dim == 0:
            raise ValueError(f"{path}: zero feature dimension")
        while True:
            len_bytes = fh.read(2)
            if not len_bytes:
                break
            if len(len_bytes) < 2:
                raise ValueError(f"{path}: truncated record header")
            (id_len,) = struct.unpack("<H", len_bytes)
            id_bytes = fh.read(id_len)
            if len(id_bytes) < id_len:
                raise ValueError(f"{path}: truncated photo id")
            photo_id = id_bytes.decode("utf-8")
            raw = fh.read(4 * dim)
            if len(raw) < 4 * dim:
                raise ValueError(f"{path}: truncated feature vector for {photo_id!r}")
            vec = np.frombuffer(raw, dtype="<f4").astype(np.float32)
            _check_vector(photo_id, vec, dim, vectors)
            vectors[photo_id] = vec
    return FeatureStore(dim=dim, vectors=vectors)


def _load_features_jsonl(path) -> FeatureStore:
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path} line {lineno}: bad JSON ({exc.msg})") from None
            try:
                photo_id = rec["photo_id"]
                features = rec["features"]
            except (KeyError, TypeError):
                raise ValueError(
                    f"{path} line {lineno}: record needs 'photo_id' and 'features'"
                ) from None
            for x in features:
                if not isinstance(x, (int, float)) or not math.isfinite(x):
                    raise ValueError(f"photo {photo_id!r}: non-finite feature value")
            vec = np.asarray(features, dtype=np.float32)
            if dim is None:
                dim = vec.shape[0]
                if dim == 0:
                    raise ValueError(f"{path} line {lineno}: empty feature vector")
            _check_vector(photo_id, vec, dim, vectors)
            vectors[photo_id] = vec
    if dim is None:
        raise ValueError(f"{path}: empty feature file")
    return FeatureStore(dim=dim, vectors=vectors)


def load_features(path) -> FeatureStore:
    """Load photo features from the binary format or its JSON-lines twin."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == FEATURE_MAGIC:
        return _load_features_binary(path)
    return _load_features_jsonl(path)


def write_features(store: FeatureStore, path, fmt: str = "binary") -> None:
    """Write a FeatureStore in the binary (default) or jsonl format."""
    ids = sorted(store.vectors)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC)
            fh.write(struct.pack("<II", FEATURE_VERSION, store.dim))
            for pid in ids:
                id_bytes = pid.encode("utf-8")
                fh.write(struct.pack("<H", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(np.asarray(store.vectors[pid], dtype="<f4").tobytes())
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for pid in ids:
                vec = [float(x) for x in store.vectors[pid]]
                fh.write(json.dumps({"photo_id": pid, "features": vec}) + "\n")
    else:
        raise ValueError(f"unknown feature file format {fmt!r}")


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Totals and the five distributions describing a corpus."""
    items_by_photo = Counter(len(corpus.photos_of_item(i)) for i in corpus.items)
    item_review_counts = Counter(r.item_id for r in corpus.reviews)
    items_by_review = Counter(item_review_counts[i] for i in corpus.items)
    reviews_by_photo = Counter(len(r.photo_ids) for r in corpus.reviews)
    users_by_review = Counter(len(corpus.reviews_by_user[u]) for u in corpus.users)
    users_by_photo = Counter(len(corpus.photos_of_user(u)) for u in corpus.users)
    return StatsReport(
        num_users=len(corpus.users),
        num_items=len(corpus.items),
        num_photos=len(corpus.author_of),
        num_reviews=len(corpus.reviews),
        items_by_photo_count=dict(sorted(items_by_photo.items())),
        items_by_review_count=dict(sorted(items_by_review.items())),
        reviews_by_photo_count=dict(sorted(reviews_by_photo.items())),
        users_by_review_count=dict(sorted(users_by_review.items())),
        users_by_photo_count=dict(sorted(users_by_photo.items())),
    )


def write_stats(report: StatsReport, out_dir) -> list:
    """Write one CSV per histogram plus a totals file; returns written paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []

    totals_path = os.path.join(out_dir, "totals.csv")
    with open(totals_path, "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        fh.write(f"users,{report.num_users}\n")
        fh.write(f"items,{report.num_items}\n")
        fh.write(f"photos,{report.num_photos}\n")
        fh.write(f"reviews,{report.num_reviews}\n")
    written.append(totals_path)

    histograms = {
        "items_by_photo_count": report.items_by_photo_count,
        "items_by_review_count": report.items_by_review_count,
        "reviews_by_photo_count": report.reviews_by_photo_count,
        "users_by_review_count": report.users_by_review_count,
        "users_by_photo_count": report.users_by_photo_count,
    }
    for name, hist in histograms.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("value,count\n")
            for value in sorted(hist):
                fh.write(f"{value},{hist[value]}\n")
        written.append(path)
    return written
