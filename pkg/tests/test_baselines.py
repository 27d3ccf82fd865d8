"""Random and centroid comparison methods."""

import numpy as np
import pytest

from elvis.baselines import BaselineSpec, centroid_scores, random_scores
from elvis.corpus import FeatureStore


class TestRandomScores:
    def test_deterministic_per_seed(self):
        cands = ["a", "b", "c"]
        np.testing.assert_array_equal(random_scores(cands, 7), random_scores(cands, 7))

    def test_scores_in_unit_interval(self):
        s = random_scores([f"c{i}" for i in range(1000)], 0)
        assert np.all(s >= 0) and np.all(s < 1)

    def test_seeds_differ(self):
        cands = ["a", "b", "c"]
        assert not np.array_equal(random_scores(cands, 1), random_scores(cands, 2))

    def test_first_rank_frequency_matches_uniform_permutation(self):
        # every candidate should win the argmax about 1/n of the time;
        # 400 seeds keep the sampling error well inside the +-5pp band
        for n in (5, 10):
            cands = [f"c{i}" for i in range(n)]
            firsts = np.zeros(n)
            seeds = 400
            for seed in range(seeds):
                firsts[np.argmax(random_scores(cands, seed))] += 1
            freqs = firsts / seeds
            assert np.max(np.abs(freqs - 1.0 / n)) < 0.05

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            random_scores([], 0)


def store_from(vectors):
    dim = len(next(iter(vectors.values())))
    return FeatureStore(dim=dim, vectors={
        k: np.asarray(v, dtype=np.float32) for k, v in vectors.items()
    })


class TestCentroidScores:
    def test_photo_on_centroid_ranks_first(self):
        store = store_from({"a": [0.0, 0.0], "b": [2.0, 0.0], "c": [1.0, 0.0]})
        scores = centroid_scores(["a", "b", "c"], store)
        assert np.argmax(scores) == 2   # "c" sits exactly on the centroid

    def test_single_photo_scores_zero(self):
        store = store_from({"a": [3.0, 4.0]})
        scores = centroid_scores(["a"], store)
        assert scores[0] == 0.0

    def test_matches_brute_force_distance_sort(self):
        rng = np.random.default_rng(12)
        ids = [f"p{i}" for i in range(20)]
        store = store_from({pid: rng.normal(size=8) for pid in ids})
        scores = centroid_scores(ids, store)
        ranked = [ids[i] for i in np.argsort(-scores, kind="stable")]

        # independent oracle: explicit distances, explicit sort
        vecs = np.stack([np.asarray(store[pid], dtype=np.float64) for pid in ids])
        center = vecs.mean(axis=0)
        dists = {pid: float(np.sqrt(((np.asarray(store[pid], np.float64) - center) ** 2).sum()))
                 for pid in ids}
        expected = sorted(ids, key=lambda pid: dists[pid])
        assert ranked == expected

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        ids = [f"p{i}" for i in range(12)]
        base = {pid: rng.normal(size=5) for pid in ids}
        shifted = {pid: v + 17.5 for pid, v in base.items()}
        order_a = np.argsort(-centroid_scores(ids, store_from(base)))
        order_b = np.argsort(-centroid_scores(ids, store_from(shifted)))
        np.testing.assert_array_equal(order_a, order_b)

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        ids = [f"p{i}" for i in range(12)]
        base = {pid: rng.normal(size=5) for pid in ids}
        scaled = {pid: 3.0 * v for pid, v in base.items()}
        order_a = np.argsort(-centroid_scores(ids, store_from(base)))
        order_b = np.argsort(-centroid_scores(ids, store_from(scaled)))
        np.testing.assert_array_equal(order_a, order_b)

    def test_ordering_equals_inverse_distance_ordering(self):
        rng = np.random.default_rng(5)
        ids = [f"p{i}" for i in range(15)]
        store = store_from({pid: rng.normal(size=6) for pid in ids})
        scores = centroid_scores(ids, store)
        assert np.all(scores < 0)   # nothing exactly on the centroid here
        inverse = 1.0 / (-scores)
        np.testing.assert_array_equal(np.argsort(-scores), np.argsort(-inverse))

    def test_missing_feature_rejected(self):
        store = store_from({"a": [1.0]})
        with pytest.raises(KeyError):
            centroid_scores(["a", "zz"], store)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            centroid_scores([], store_from({"a": [1.0]}))


class TestBaselineSpec:
    def test_valid(self):
        assert BaselineSpec("random", repetitions=10).repetitions == 10
        assert BaselineSpec("centroid").repetitions == 1

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            BaselineSpec("popularity")

    def test_bad_repetitions(self):
        with pytest.raises(ValueError):
            BaselineSpec("random", repetitions=0)
