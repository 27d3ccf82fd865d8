"""Corpus loading, feature files, and statistics."""

import struct

import numpy as np
import pytest

from elvis.corpus import (
    Corpus,
    FeatureStore,
    Review,
    corpus_stats,
    load_features,
    load_reviews,
    write_features,
    write_reviews,
    write_stats,
)

LINES = [
    "r1\tu1\ti1\t100\t4\tp1,p2",
    "r2\tu1\ti2\t200\t-\tp3",
    "r3\tu2\ti1\t150\t5\tp4,p5,p6",
    "r4\tu3\ti2\t90\t2\t",
]


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


class TestLoadReviews:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        path.write_text("")
        c = load_reviews(path)
        assert len(c.users) == 0 and len(c.items) == 0 and len(c.author_of) == 0

    def test_single_record_indexes(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, ["r1\tu1\ti1\t100\t4\tp1,p2"])
        c = load_reviews(path)
        assert c.photos_of_user("u1") == ("p1", "p2")
        assert c.photos_of_item("i1") == ("p1", "p2")
        assert c.photos_of_user_item("u1", "i1") == ("p1", "p2")

    def test_full_example(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, LINES)
        c = load_reviews(path)
        assert c.users == {"u1", "u2", "u3"}
        assert c.items == {"i1", "i2"}
        assert len(c.author_of) == 6
        assert c.author_of["p4"] == "u2"
        assert c.item_of["p3"] == "i2"
        # rating dash parses to None, empty photo list allowed
        by_id = {r.review_id: r for r in c.reviews}
        assert by_id["r2"].rating is None
        assert by_id["r4"].photo_ids == ()

    def test_photo_in_two_reviews_rejected(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, ["r1\tu1\ti1\t100\t4\tp1", "r2\tu2\ti2\t200\t5\tp1"])
        with pytest.raises(ValueError, match="owned by two reviews"):
            load_reviews(path)

    def test_duplicate_review_id_rejected(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, ["r1\tu1\ti1\t100\t4\tp1", "r1\tu2\ti2\t200\t5\tp2"])
        with pytest.raises(ValueError, match="duplicate review_id"):
            load_reviews(path)

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, ["r1\tu1\ti1\t100\t4\tp1", "not a review"])
        with pytest.raises(ValueError, match="line 2"):
            load_reviews(path)

    def test_bad_timestamp(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, ["r1\tu1\ti1\tsoon\t4\tp1"])
        with pytest.raises(ValueError, match="timestamp"):
            load_reviews(path)

    def test_duplicate_photo_within_review(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, ["r1\tu1\ti1\t100\t4\tp1,p1"])
        with pytest.raises(ValueError, match="duplicate photo"):
            load_reviews(path)

    def test_idempotent_loading(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, LINES)
        assert load_reviews(path) == load_reviews(path)

    def test_permutation_invariance(self, tmp_path):
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        write_lines(a, LINES)
        write_lines(b, list(reversed(LINES)))
        ca, cb = load_reviews(a), load_reviews(b)
        assert ca == cb
        assert ca.photos_by_user == cb.photos_by_user
        assert ca.photos_by_item == cb.photos_by_item

    def test_write_round_trip(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, LINES)
        c = load_reviews(path)
        out = tmp_path / "copy.tsv"
        write_reviews(c, out)
        assert load_reviews(out) == c


class TestCorpusInvariants:
    def test_index_consistency(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, LINES)
        c = load_reviews(path)
        for u in c.users:
            for it in c.items:
                expected = set(c.photos_of_user(u)) & set(c.photos_of_item(it))
                assert set(c.photos_of_user_item(u, it)) == expected

    def test_photo_universe_matches(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, LINES)
        c = load_reviews(path)
        by_user = set().union(*(c.photos_of_user(u) for u in c.users))
        by_item = set().union(*(c.photos_of_item(i) for i in c.items))
        assert by_user == by_item == set(c.author_of)


def make_store(n=3, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureStore(
        dim=dim,
        vectors={f"p{i}": rng.normal(size=dim).astype(np.float32) for i in range(n)},
    )


class TestFeatureFiles:
    def test_binary_round_trip(self, tmp_path):
        store = make_store()
        path = tmp_path / "f.elvf"
        write_features(store, path)
        loaded = load_features(path)
        assert loaded.dim == store.dim
        assert set(loaded.vectors) == set(store.vectors)
        for pid in store.vectors:
            np.testing.assert_array_equal(loaded[pid], store[pid])

    def test_jsonl_matches_binary(self, tmp_path):
        store = make_store()
        b, j = tmp_path / "f.elvf", tmp_path / "f.jsonl"
        write_features(store, b)
        write_features(store, j, fmt="jsonl")
        lb, lj = load_features(b), load_features(j)
        assert lb.dim == lj.dim
        for pid in store.vectors:
            np.testing.assert_array_equal(lb[pid], lj[pid])

    def test_single_record_header(self, tmp_path):
        path = tmp_path / "f.elvf"
        write_features(FeatureStore(dim=1536, vectors={"p0": np.zeros(1536, np.float32)}), path)
        loaded = load_features(path)
        assert loaded.dim == 1536 and len(loaded) == 1

    def test_dim_mismatch_rejected(self, tmp_path):
        path = tmp_path / "f.elvf"
        with open(path, "wb") as fh:
            fh.write(b"ELVF")
            fh.write(struct.pack("<II", 1, 4))
            fh.write(struct.pack("<H", 2) + b"p0")
            fh.write(np.zeros(3, "<f4").tobytes())   # 3 floats but header says 4
        with pytest.raises(ValueError, match="truncated"):
            load_features(path)

    def test_jsonl_dim_mismatch(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text(
            '{"photo_id": "a", "features": [1.0, 2.0, 3.0, 4.0]}\n'
            '{"photo_id": "b", "features": [1.0, 2.0, 3.0]}\n'
        )
        with pytest.raises(ValueError, match="expected 4"):
            load_features(path)

    def test_duplicate_photo_id_rejected(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text(
            '{"photo_id": "a", "features": [1.0]}\n{"photo_id": "a", "features": [2.0]}\n'
        )
        with pytest.raises(ValueError, match="duplicate"):
            load_features(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text('{"photo_id": "a", "features": [1.0, NaN]}\n')
        with pytest.raises(ValueError, match="non-finite"):
            load_features(path)

    def test_binary_nan_rejected(self, tmp_path):
        path = tmp_path / "f.elvf"
        with open(path, "wb") as fh:
            fh.write(b"ELVF")
            fh.write(struct.pack("<II", 1, 2))
            fh.write(struct.pack("<H", 2) + b"p0")
            fh.write(np.array([1.0, np.nan], "<f4").tobytes())
        with pytest.raises(ValueError, match="non-finite"):
            load_features(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.bin"
        path.write_bytes(b"\x00\x01\x02\x03junk")
        with pytest.raises(ValueError):
            load_features(path)

    def test_missing_photo_message(self):
        store = make_store()
        with pytest.raises(KeyError, match="p99"):
            store["p99"]


class TestCorpusStats:
    def test_direct_counts(self):
        c = Corpus((
            Review("r1", "u1", "i1", 1, 5, ("p1", "p2")),
            Review("r2", "u2", "i1", 2, 3, ("p3",)),
        ))
        s = corpus_stats(c)
        assert (s.num_users, s.num_items, s.num_photos) == (2, 1, 3)

    def test_histogram_conservation(self, tmp_path):
        path = tmp_path / "reviews.tsv"
        write_lines(path, LINES)
        c = load_reviews(path)
        s = corpus_stats(c)
        assert sum(v * n for v, n in s.users_by_photo_count.items()) == s.num_photos
        assert sum(v * n for v, n in s.items_by_photo_count.items()) == s.num_photos
        assert sum(v * n for v, n in s.reviews_by_photo_count.items()) == s.num_photos
        assert sum(v * n for v, n in s.users_by_review_count.items()) == s.num_reviews
        assert sum(v * n for v, n in s.items_by_review_count.items()) == s.num_reviews
        # bin populations also conserve entity counts
        assert sum(s.users_by_photo_count.values()) == s.num_users
        assert sum(s.items_by_review_count.values()) == s.num_items
        assert sum(s.reviews_by_photo_count.values()) == s.num_reviews

    def test_write_stats_files(self, tmp_path):
        c = Corpus((Review("r1", "u1", "i1", 1, 5, ("p1",)),))
        paths = write_stats(corpus_stats(c), tmp_path / "stats")
        assert len(paths) == 6
        totals = (tmp_path / "stats" / "totals.csv").read_text()
        assert "users,1" in totals and "photos,1" in totals
