"""k-means++ seeding, Lloyd iteration and the silhouette score."""

import numpy as np
import pytest

from cackit.cluster_core import kmeanspp_init, lloyd, nearest_index, silhouette
from cackit.errors import DimensionMismatch, KTooLarge, OneCluster


def blob_pair(n_per=50, gap=10.0, d=2, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_per, d))
    b = rng.normal(size=(n_per, d)) + gap
    return np.vstack([a, b])


class TestKmeansppInit:
    def test_k_equals_n_returns_permutation_of_rows(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(12, 3))
        cents = kmeanspp_init(x, 12, seed=5)
        got = sorted(map(tuple, cents))
        want = sorted(map(tuple, x))
        assert got == want

    def test_k_one_is_a_data_row(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(20, 4))
        c = kmeanspp_init(x, 1, seed=0)
        assert any(np.array_equal(c[0], row) for row in x)

    def test_duplicate_heavy_data_yields_the_distinct_rows(self):
        base = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        x = np.repeat(base, 7, axis=0)
        cents = kmeanspp_init(x, 3, seed=3)
        assert sorted(map(tuple, cents)) == sorted(map(tuple, base))

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            kmeanspp_init(np.zeros((3, 2)), 4)

    def test_deterministic(self):
        x = blob_pair()
        a = kmeanspp_init(x, 4, seed=9)
        b = kmeanspp_init(x, 4, seed=9)
        np.testing.assert_array_equal(a, b)


class TestLloyd:
    def test_square_corners_sse_zero_in_one_iteration(self):
        corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        res = lloyd(corners, corners.copy())
        assert res.sse == 0.0
        assert res.iterations == 1

    def test_two_blobs_recovered(self):
        x = blob_pair(gap=10.0)
        res = lloyd(x, kmeanspp_init(x, 2, seed=0))
        first_half = res.assignments[:50]
        second_half = res.assignments[50:]
        assert len(set(first_half)) == 1
        assert len(set(second_half)) == 1
        assert first_half[0] != second_half[0]

    def test_k_one_closed_form(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 3))
        res = lloyd(x, x[:1].copy())
        np.testing.assert_allclose(res.centroids[0], x.mean(axis=0))
        np.testing.assert_allclose(res.sse, ((x - x.mean(axis=0)) ** 2).sum(), rtol=1e-12)

    def test_sse_matches_assignments(self):
        x = blob_pair(gap=3.0, seed=7)
        res = lloyd(x, kmeanspp_init(x, 3, seed=7))
        direct = sum(((x[res.assignments == j] - res.centroids[j]) ** 2).sum()
                     for j in range(3))
        assert abs(res.sse - direct) <= 1e-6 * max(1.0, direct)

    def test_output_is_a_fixed_point(self):
        x = blob_pair(gap=2.0, seed=8)
        res = lloyd(x, kmeanspp_init(x, 4, seed=8))
        again = lloyd(x, res.centroids.copy(), max_iter=1)
        np.testing.assert_array_equal(again.assignments, res.assignments)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            lloyd(np.zeros((5, 3)), np.zeros((2, 4)))


class TestNearestIndex:
    def test_picks_closest(self):
        cents = np.array([[0.0, 0.0], [10.0, 0.0]])
        assert nearest_index(cents, np.array([9.0, 0.0])) == 1

    def test_tie_goes_to_lowest_index(self):
        cents = np.array([[-1.0, 0.0], [1.0, 0.0]])
        assert nearest_index(cents, np.array([0.0, 0.0])) == 0


class TestSilhouette:
    def test_two_tight_far_pairs(self):
        x = np.array([[0.0, 0.0], [0.1, 0.0], [9.0, 9.0], [9.1, 9.0]])
        score = silhouette(x, np.array([0, 0, 1, 1]))
        assert score > 0.9

    def test_random_assignment_near_zero(self):
        scores = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=(80, 3))
            scores.append(silhouette(x, rng.integers(0, 2, size=80)))
        assert abs(np.mean(scores)) < 0.1

    def test_two_singletons_score_zero(self):
        x = np.array([[0.0, 0.0], [5.0, 5.0]])
        assert silhouette(x, np.array([0, 1])) == 0.0

    def test_range(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(40, 2))
        for seed in range(5):
            a = np.random.default_rng(seed).integers(0, 3, size=40)
            if len(set(a.tolist())) < 2:
                continue
            s = silhouette(x, a)
            assert -1.0 <= s <= 1.0

    def test_one_cluster_rejected(self):
        with pytest.raises(OneCluster):
            silhouette(np.zeros((4, 2)), np.zeros(4, dtype=int))
