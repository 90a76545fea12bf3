import math
import random

import numpy as np
import pytest

from minperm.recommender import (
    Neighbor,
    NoNeighborsError,
    TrainingSet,
    adaptive_cutoff,
    distance,
    rank_values,
    recommend,
    recommend_values,
    similarity,
)
from conftest import random_perm_subset, random_prob_vector


def direct_recommendation_values(target, train_vecs, train_perms, threshold):
    """Straight-from-definition weighted voting; the oracle for recommend_values.

    Returns None when no training vector clears the similarity threshold.
    """
    members = []
    for vec, perms in zip(train_vecs, train_perms):
        dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(target, vec)))
        sim = 1.0 / (1.0 + dist)
        if sim > threshold:
            members.append((sim, perms))
    if not members:
        return None
    norm = sum(sim for sim, _ in members)
    universe = set().union(*(perms for _, perms in members))
    return {
        perm: sum(sim for sim, perms in members if perm in perms) / norm
        for perm in universe
    }


def make_training(vecs, perms, floor=0.05):
    return TrainingSet(
        ids=[f"t{i:03d}" for i in range(len(vecs))],
        func=np.array(vecs, dtype=np.float64),
        declared=[frozenset(p) for p in perms],
        relevance_floor=floor,
    )


class TestDistanceSimilarity:
    def test_identity(self):
        x = np.array([0.2, 0.8])
        assert distance(x, x) == 0.0
        assert similarity(x, x) == 1.0

    def test_hand_value(self):
        x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert distance(x, y) == pytest.approx(math.sqrt(2), abs=1e-12)
        assert similarity(x, y) == pytest.approx(1 / (1 + math.sqrt(2)), abs=1e-12)

    def test_symmetric_and_positive(self):
        rng = random.Random(0)
        for _ in range(50):
            x = random_prob_vector(rng, 4)
            y = random_prob_vector(rng, 4)
            assert distance(x, y) == distance(y, x)
            assert 0 < similarity(x, y) <= 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            distance(np.array([1.0]), np.array([1.0, 0.0]))


class TestSelectNeighbors:
    def test_high_threshold_excludes_everything(self):
        rng = random.Random(1)
        vecs = [random_prob_vector(rng, 3) for _ in range(5)]
        training = make_training(vecs, [["INTERNET"]] * 5)
        target = random_prob_vector(rng, 3)
        assert training.neighbors(target, 0.99) == []

    def test_strictly_above_threshold(self):
        training = make_training([[0.5, 0.5]], [["INTERNET"]])
        target = np.array([0.5, 0.5])
        # similarity exactly 1.0 > 0.99
        assert len(training.neighbors(target, 0.99)) == 1

    def test_index_matches_exhaustive_on_random_corpora(self):
        rng = random.Random(2)
        for trial in range(100):
            k = rng.randint(2, 8)
            n = 50
            vecs = []
            for _ in range(n):
                if rng.random() < 0.7:  # concentrated vectors make the index useful
                    vec = np.full(k, 0.02 / (k - 1) if k > 1 else 0.0)
                    vec[rng.randrange(k)] = 0.98
                    vec = vec / vec.sum()
                else:
                    vec = random_prob_vector(rng, k)
                vecs.append(vec)
            training = make_training(vecs, [["INTERNET"]] * n)
            target = vecs[rng.randrange(n)] if rng.random() < 0.5 else random_prob_vector(rng, k)
            threshold = rng.choice([0.4, 0.6, 0.7, 0.8, 0.9])
            fast = training.neighbors(target, threshold, use_index=True)
            slow = training.neighbors(target, threshold, use_index=False)
            assert fast == slow, f"trial {trial}"

    def test_invalid_threshold(self):
        training = make_training([[1.0, 0.0]], [["INTERNET"]])
        with pytest.raises(ValueError):
            training.neighbors(np.array([1.0, 0.0]), 0.0)


class TestRecommendValues:
    def test_unanimous(self):
        neighbors = [Neighbor("a", 0.9), Neighbor("b", 0.5)]
        declared = {"a": frozenset({"INTERNET"}), "b": frozenset({"INTERNET"})}
        assert recommend_values(neighbors, declared) == {"INTERNET": 1.0}

    def test_half_split(self):
        neighbors = [Neighbor("a", 0.5), Neighbor("b", 0.5)]
        declared = {"a": frozenset({"CAMERA"}), "b": frozenset()}
        assert recommend_values(neighbors, declared)["CAMERA"] == pytest.approx(0.5, abs=1e-12)

    def test_three_neighbors_hand_value(self):
        neighbors = [Neighbor("a", 0.6), Neighbor("b", 0.3), Neighbor("c", 0.1)]
        declared = {"a": frozenset({"NFC"}), "b": frozenset(), "c": frozenset()}
        assert recommend_values(neighbors, declared)["NFC"] == pytest.approx(0.6, abs=1e-12)

    def test_empty_raises(self):
        with pytest.raises(NoNeighborsError):
            recommend_values([], {})

    def test_similarity_scaling_invariance(self):
        rng = random.Random(3)
        perms = ["A", "B", "C", "D"]
        for _ in range(50):
            n = rng.randint(1, 6)
            neighbors = [Neighbor(f"n{i}", rng.uniform(0.1, 1.0)) for i in range(n)]
            declared = {f"n{i}": random_perm_subset(rng, perms) for i in range(n)}
            base = recommend_values(neighbors, declared)
            scale = rng.uniform(0.5, 3.0)
            scaled = recommend_values(
                [Neighbor(nb.app_id, nb.similarity * scale) for nb in neighbors], declared
            )
            assert set(base) == set(scaled)
            for perm in base:
                assert scaled[perm] == pytest.approx(base[perm], abs=1e-12)

    def test_oracle_equivalence_small_corpora(self):
        rng = random.Random(4)
        universe = ["P1", "P2", "P3", "P4", "P5", "P6"]
        checked = 0
        for _ in range(200):
            k = rng.randint(2, 4)
            n = rng.randint(1, 10)
            vecs = [random_prob_vector(rng, k) for _ in range(n)]
            perms = [random_perm_subset(rng, universe) for _ in range(n)]
            target = random_prob_vector(rng, k)
            threshold = rng.uniform(0.35, 0.95)
            training = make_training(vecs, perms)
            expected = direct_recommendation_values(target, vecs, perms, threshold)
            neighbors = training.neighbors(target, threshold)
            if expected is None:
                assert neighbors == []
                continue
            got = recommend_values(neighbors, training.declared_by_id())
            assert set(got) == set(expected)
            for perm, value in expected.items():
                assert got[perm] == pytest.approx(value, abs=1e-12)
                assert 0 < got[perm] <= 1
            checked += 1
        assert checked > 50


class TestAdaptiveCutoff:
    def test_cut_after_large_gap(self):
        kept = adaptive_cutoff({"p1": 0.9, "p2": 0.88, "p3": 0.1})
        assert [p for p, _ in kept] == ["p1", "p2"]

    def test_uniform_values_kept_whole(self):
        kept = adaptive_cutoff({"p1": 0.5, "p2": 0.5, "p3": 0.5})
        assert [p for p, _ in kept] == ["p1", "p2", "p3"]

    def test_single_entry(self):
        assert adaptive_cutoff({"p1": 0.7}) == [("p1", 0.7)]

    def test_recuts_within_the_head(self):
        kept = adaptive_cutoff({"a": 1.0, "b": 0.45, "c": 0.44, "d": 0.1})
        assert [p for p, _ in kept] == ["a"]

    def test_tie_break_is_name_ascending(self):
        ranked = rank_values({"b": 0.5, "a": 0.5, "c": 0.9})
        assert [p for p, _ in ranked] == ["c", "a", "b"]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            adaptive_cutoff({})


class TestRecommend:
    def test_single_unanimous_neighbor(self):
        training = make_training([[0.9, 0.1]], [["INTERNET"]])
        rec = recommend(np.array([0.9, 0.1]), training, 0.6)
        assert rec.ranked == (("INTERNET", 1.0),)
        assert rec.permissions == {"INTERNET"}

    def test_no_neighbors_surfaces(self):
        training = make_training([[1.0, 0.0]], [["INTERNET"]])
        with pytest.raises(NoNeighborsError):
            recommend(np.array([0.0, 1.0]), training, 0.9)

    def test_relax_threshold_fallback(self):
        training = make_training([[1.0, 0.0]], [["INTERNET"]])
        rec = recommend(np.array([0.0, 1.0]), training, 0.9, relax_threshold=True)
        assert rec.permissions == {"INTERNET"}

    def test_truncated_is_prefix_of_ranked(self):
        rng = random.Random(5)
        universe = ["A", "B", "C", "D", "E"]
        for _ in range(30):
            n = rng.randint(1, 8)
            vecs = [random_prob_vector(rng, 3) for _ in range(n)]
            perms = [random_perm_subset(rng, universe) | {"A"} for _ in range(n)]
            training = make_training(vecs, perms)
            rec = recommend(random_prob_vector(rng, 3), training, 0.4)
            assert rec.truncated == rec.ranked[: rec.truncated_at]
            values = [v for _, v in rec.ranked]
            assert values == sorted(values, reverse=True)
            assert all(0 < v <= 1 for v in values)
