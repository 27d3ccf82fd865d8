"""Filtering, hold-out split, negative sampling and test-case construction."""

import pytest

from elvis.corpus import Corpus, Review
from elvis.dataset import (
    build_test_cases,
    build_train_set,
    filter_corpus,
    load_test_cases,
    load_train_set,
    make_dev_split,
    split_holdout,
    write_test_cases,
    write_train_set,
)
from elvis.synth import SynthConfig, generate


def review(rid, uid, iid, ts, photos, rating=4):
    return Review(rid, uid, iid, ts, rating, tuple(photos))


class TestFilterCorpus:
    def test_photoless_review_dropped(self):
        c = Corpus((review("r1", "u1", "i1", 10, ["p1"]), review("r2", "u2", "i2", 20, [])))
        f = filter_corpus(c)
        assert len(f.reviews) == 1 and f.reviews[0].review_id == "r1"

    def test_most_recent_review_kept(self):
        c = Corpus((
            review("r1", "u1", "i1", 10, ["p1"]),
            review("r2", "u1", "i1", 20, ["p2"]),
        ))
        f = filter_corpus(c)
        assert [r.review_id for r in f.reviews] == ["r2"]

    def test_timestamp_tie_keeps_largest_review_id(self):
        c = Corpus((
            review("ra", "u1", "i1", 10, ["p1"]),
            review("rb", "u1", "i1", 10, ["p2"]),
        ))
        f = filter_corpus(c)
        assert [r.review_id for r in f.reviews] == ["rb"]

    def test_idempotent(self):
        c = Corpus((
            review("r1", "u1", "i1", 10, ["p1"]),
            review("r2", "u1", "i2", 20, ["p2"]),
        ))
        f = filter_corpus(c)
        assert f == c
        assert filter_corpus(f) == f


class TestSplitHoldout:
    def corpus(self):
        revs = []
        # u1 has 5 reviews, u2 has 1, u3 has 2
        for k in range(5):
            revs.append(review(f"a{k}", "u1", f"i{k}", 10 + k, [f"pa{k}"]))
        revs.append(review("b0", "u2", "i0", 5, ["pb0"]))
        revs.append(review("c0", "u3", "i1", 7, ["pc0"]))
        revs.append(review("c1", "u3", "i2", 9, ["pc1"]))
        return Corpus(tuple(revs))

    def test_single_review_user_stays_in_train(self):
        train, test = split_holdout(self.corpus(), seed=0)
        assert "u2" in train.users and "u2" not in test.users

    def test_multi_review_user_keeps_n_minus_one(self):
        train, test = split_holdout(self.corpus(), seed=0)
        assert len(train.reviews_by_user["u1"]) == 4
        assert len(test.reviews_by_user["u1"]) == 1

    def test_deterministic(self):
        a = split_holdout(self.corpus(), seed=42)
        b = split_holdout(self.corpus(), seed=42)
        assert a[0] == b[0] and a[1] == b[1]

    def test_different_seeds_can_differ(self):
        held = {
            split_holdout(self.corpus(), seed=s)[1].reviews_by_user["u1"][0].review_id
            for s in range(20)
        }
        assert len(held) > 1

    def test_recent_policy(self):
        train, test = split_holdout(self.corpus(), seed=0, policy="recent")
        assert test.reviews_by_user["u1"][0].review_id == "a4"
        assert test.reviews_by_user["u3"][0].review_id == "c1"

    def test_partition_is_exact(self):
        c = self.corpus()
        train, test = split_holdout(c, seed=1)
        ids = sorted(r.review_id for r in train.reviews + test.reviews)
        assert ids == sorted(r.review_id for r in c.reviews)


def toy_rich_corpus():
    """Every item has plenty of photos by distinct authors."""
    revs = []
    pid = 0
    for u in range(15):
        for it in range(4):
            photos = [f"p{pid}", f"p{pid + 1}"]
            pid += 2
            revs.append(review(f"r{u}_{it}", f"u{u}", f"i{it}", 100 + u, photos))
    return Corpus(tuple(revs))


class TestBuildTrainSet:
    def test_full_pools_give_20_10_10(self):
        ts = build_train_set(toy_rich_corpus(), seed=0)
        for g in ts.provenance:
            assert g.positive_copies == 20
            assert len(g.same_item_negatives) == 10
            assert len(g.other_item_negatives) == 10

    def test_global_balance(self):
        ts = build_train_set(toy_rich_corpus(), seed=0)
        positives = sum(p.label for p in ts.pairs)
        assert positives * 2 == len(ts.pairs)

    def test_labels_match_authorship(self):
        c = toy_rich_corpus()
        ts = build_train_set(c, seed=0)
        for p in ts.pairs:
            if p.label == 1:
                assert c.author_of[p.photo_id] == p.user_id
            else:
                assert c.author_of[p.photo_id] != p.user_id

    def test_shortfall_transfers_to_other_pool(self):
        # item i0 has the positive author u0 plus exactly 2 other authors
        # with 2 photos each -> same-item pool of 4; other items provide
        # a deep pool, so each i0 positive gets 4 + 16 negatives.
        revs = [
            review("r0", "u0", "i0", 10, ["x0"]),
            review("r1", "u1", "i0", 11, ["x1", "x2"]),
            review("r2", "u2", "i0", 12, ["x3", "x4"]),
        ]
        pid = 0
        for u in range(3, 15):
            revs.append(review(f"q{u}", f"u{u}", "i1", 20 + u, [f"y{pid}", f"y{pid+1}"]))
            pid += 2
        c = Corpus(tuple(revs))

        # independent brute-force pools for the positive (u0, x0)
        same_pool = {p for p in c.photos_of_item("i0") if c.author_of[p] != "u0"}
        other_pool = {
            p for p in c.author_of
            if c.item_of[p] != "i0" and c.author_of[p] != "u0"
        }
        assert len(same_pool) == 4 and len(other_pool) >= 16

        ts = build_train_set(c, seed=0)
        group = next(g for g in ts.provenance if g.photo_id == "x0")
        assert len(group.same_item_negatives) == 4
        assert len(group.other_item_negatives) == 16
        assert group.positive_copies == 20
        assert set(group.same_item_negatives) <= same_pool
        assert set(group.other_item_negatives) <= other_pool

    def test_no_negative_authored_by_pair_user(self):
        c = toy_rich_corpus()
        ts = build_train_set(c, seed=3)
        for p in ts.pairs:
            if p.label == 0:
                assert c.author_of[p.photo_id] != p.user_id

    def test_origin_consistency(self):
        c = toy_rich_corpus()
        ts = build_train_set(c, seed=3)
        positives_by_user = {u: set(c.photos_of_user(u)) for u in c.users}
        for g in ts.provenance:
            for p in g.same_item_negatives:
                assert c.item_of[p] == g.item_id
            for p in g.other_item_negatives:
                assert c.item_of[p] != g.item_id
                assert p not in positives_by_user[g.user_id]

    def test_deterministic(self):
        a = build_train_set(toy_rich_corpus(), seed=11)
        b = build_train_set(toy_rich_corpus(), seed=11)
        assert a.pairs == b.pairs and a.provenance == b.provenance

    def test_no_negative_pool_is_an_error(self):
        c = Corpus((review("r0", "u0", "i0", 1, ["p0", "p1"]),))
        with pytest.raises(ValueError, match="no negative pool"):
            build_train_set(c, seed=0)

    def test_sampling_without_replacement(self):
        ts = build_train_set(toy_rich_corpus(), seed=7)
        for g in ts.provenance:
            negs = g.same_item_negatives + g.other_item_negatives
            assert len(set(negs)) == len(negs)


class TestBuildTestCases:
    def split(self):
        cfg = SynthConfig(num_users=40, num_items=10, feature_dim=8, seed=21)
        corpus, _, _ = generate(cfg)
        filtered = filter_corpus(corpus)
        return split_holdout(filtered, seed=5)

    def test_candidate_count_is_others_plus_one(self):
        revs = [review("r0", "u0", "i0", 1, ["f"])]
        for u in range(1, 7):
            revs.append(review(f"r{u}", f"u{u}", "i0", 1 + u, [f"a{u}", f"b{u}"]))
        train = Corpus(tuple(revs[1:]))
        test = Corpus((revs[0],))
        cases = build_test_cases(train, test)
        assert len(cases) == 1
        assert len(cases[0].candidate_photo_ids) == 13

    def test_item_without_training_photos_gives_singleton(self):
        train = Corpus((review("r1", "u1", "i1", 1, ["p1"]),))
        test = Corpus((review("r2", "u2", "i9", 2, ["p9"]),))
        cases = build_test_cases(train, test)
        assert cases[0].candidate_photo_ids == ("p9",)

    def test_positive_in_candidates_and_others_not_authored(self):
        train, test = self.split()
        cases = build_test_cases(train, test)
        assert cases
        for case in cases:
            assert case.positive_photo_id in case.candidate_photo_ids
            for pid in case.candidate_photo_ids:
                if pid != case.positive_photo_id:
                    assert train.author_of[pid] != case.user_id

    def test_split_soundness(self):
        train, test = self.split()
        cases = build_test_cases(train, test)
        for case in cases:
            assert len(train.reviews_by_user[case.user_id]) >= 1
            train_items = {r.item_id for r in train.reviews_by_user[case.user_id]}
            assert case.item_id not in train_items
            assert case.positive_photo_id not in train.author_of

    def test_user_train_photo_count(self):
        train, test = self.split()
        for case in build_test_cases(train, test):
            assert case.user_train_photo_count == len(train.photos_of_user(case.user_id))


class TestMakeDevSplit:
    def corpus(self):
        cfg = SynthConfig(num_users=30, num_items=8, feature_dim=8, seed=2)
        corpus, _, _ = generate(cfg)
        train, _ = split_holdout(filter_corpus(corpus), seed=1)
        return train

    def test_dev_positives_disjoint_from_subtrain(self):
        train = self.corpus()
        subtrain, dev_cases = make_dev_split(train, seed=9)
        for case in dev_cases:
            assert case.positive_photo_id not in subtrain.author_of

    def test_everything_stays_inside_training_corpus(self):
        train = self.corpus()
        subtrain, dev_cases = make_dev_split(train, seed=9)
        train_photos = set(train.author_of)
        assert set(subtrain.author_of) <= train_photos
        for case in dev_cases:
            assert case.positive_photo_id in train_photos

    def test_deterministic(self):
        train = self.corpus()
        a = make_dev_split(train, seed=4)
        b = make_dev_split(train, seed=4)
        assert a[0] == b[0] and a[1] == b[1]


class TestSerialization:
    def test_train_set_round_trip(self, tmp_path):
        ts = build_train_set(toy_rich_corpus(), seed=0)
        path = tmp_path / "pairs.tsv"
        write_train_set(ts, path)
        loaded = load_train_set(path)
        assert loaded.pairs == ts.pairs

    def test_test_cases_round_trip(self, tmp_path):
        cfg = SynthConfig(num_users=25, num_items=6, feature_dim=8, seed=3)
        corpus, _, _ = generate(cfg)
        train, test = split_holdout(filter_corpus(corpus), seed=0)
        cases = build_test_cases(train, test)
        path = tmp_path / "cases.tsv"
        write_test_cases(cases, path)
        loaded = load_test_cases(path, train=train)
        assert loaded == cases
