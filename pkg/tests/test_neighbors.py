import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klentropy.core_math import Metric
from klentropy.errors import ArityError, DegenerateDataError, DomainError
from klentropy.neighbors import Dataset, KDTree, count_in_ball, knn_distances, set_threads


def enumerate_knn(points, k, metric):
    """Pure-Python k-th neighbour distance by sorting every pair."""
    out = []
    for i, a in enumerate(points):
        ds = []
        for j, b in enumerate(points):
            if i == j:
                continue
            diffs = [abs(x - y) for x, y in zip(a, b)]
            ds.append(max(diffs) if metric is Metric.CHEBYSHEV else math.sqrt(sum(t * t for t in diffs)))
        out.append(sorted(ds)[k - 1])
    return np.array(out)


class TestDataset:
    def test_one_dimensional_input(self):
        ds = Dataset([0.0, 1.0, 3.0])
        assert ds.n_points == 3 and ds.dim == 1

    def test_read_only(self):
        ds = Dataset(np.zeros((4, 2)))
        with pytest.raises(ValueError):
            ds.points[0, 0] = 1.0

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            Dataset([[0.0, np.nan], [1.0, 2.0]])


class TestKnnExamples:
    def test_line(self):
        res = knn_distances(Dataset([0.0, 1.0, 3.0]), 1, "euclidean")
        assert res.distances.tolist() == [1.0, 1.0, 2.0]
        res = knn_distances(Dataset([0.0, 1.0, 3.0]), 2, "euclidean")
        assert res.distances.tolist() == [3.0, 2.0, 3.0]

    def test_square_chebyshev(self):
        pts = [[0, 0], [1, 0], [0, 1], [1, 1]]
        assert knn_distances(Dataset(pts), 3, "chebyshev").distances.tolist() == [1.0] * 4
        assert knn_distances(Dataset(pts), 3, "euclidean").distances == pytest.approx([math.sqrt(2)] * 4)

    def test_duplicates_are_reported(self):
        with pytest.raises(DegenerateDataError) as info:
            knn_distances(Dataset([0.0, 0.0, 1.0]), 1)
        assert set(info.value.indices) == {0, 1}

    @pytest.mark.parametrize("k", [0, 3, 4])
    def test_arity(self, k):
        with pytest.raises(ArityError):
            knn_distances(Dataset([0.0, 1.0, 3.0]), k)

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            knn_distances(Dataset([0.0, 1.0, 3.0]), 1, method="ball")


class TestOracleEquivalence:
    @given(
        st.integers(0, 2**32 - 1),
        st.integers(2, 60),
        st.integers(1, 4),
        st.sampled_from(list(Metric)),
        st.integers(1, 5),
    )
    def test_tree_and_brute_match_enumeration(self, seed, n, d, metric, k):
        k = min(k, n - 1)
        pts = np.random.default_rng(seed).normal(size=(n, d))
        tree = knn_distances(Dataset(pts), k, metric, method="tree").distances
        brute = knn_distances(Dataset(pts), k, metric, method="brute").distances
        assert np.array_equal(tree, brute)
        assert np.allclose(tree, enumerate_knn(pts.tolist(), k, metric), rtol=1e-14, atol=0)

    @pytest.mark.parametrize("metric", list(Metric))
    def test_ties_on_a_lattice(self, metric):
        # integer grid: many equal distances and equal split coordinates
        pts = np.array(list(itertools.product(range(7), range(6), range(3))), dtype=float)
        for k in (1, 2, 5, 9):
            tree = knn_distances(Dataset(pts), k, metric).distances
            brute = knn_distances(Dataset(pts), k, metric, method="brute").distances
            assert np.array_equal(tree, brute)

    def test_clustered_and_collinear(self):
        rng = np.random.default_rng(5)
        pts = np.concatenate([rng.normal(size=(300, 2)) * 1e-6, rng.normal(size=(300, 2)) + 100])
        pts[:, 1] = np.where(np.arange(600) % 3 == 0, 0.5, pts[:, 1])
        for metric in Metric:
            tree = knn_distances(Dataset(pts), 4, metric).distances
            assert np.array_equal(tree, knn_distances(Dataset(pts), 4, metric, method="brute").distances)

    def test_thread_count_does_not_change_results(self):
        pts = np.random.default_rng(3).normal(size=(3000, 3))
        set_threads(1)
        one = knn_distances(Dataset(pts), 2).distances
        set_threads(None)
        many = knn_distances(Dataset(pts), 2).distances
        assert np.array_equal(one, many)

    def test_tree_object_reuse(self):
        pts = np.random.default_rng(8).normal(size=(500, 2))
        tree = KDTree(Dataset(pts))
        assert tree.n_nodes >= 1
        for k in (1, 3):
            assert np.array_equal(tree.knn_distances(k), knn_distances(Dataset(pts), k).distances)


class TestKnnProperties:
    @given(st.integers(0, 2**32 - 1), st.integers(3, 80), st.integers(1, 4), st.sampled_from(list(Metric)))
    def test_monotone_in_k(self, seed, n, d, metric):
        pts = np.random.default_rng(seed).normal(size=(n, d))
        prev = np.zeros(n)
        for k in range(1, min(n, 6)):
            cur = knn_distances(Dataset(pts), k, metric).distances
            assert np.all(cur >= prev)
            prev = cur

    @given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.integers(1, 4), st.floats(1e-3, 1e3))
    def test_scale_equivariance(self, seed, n, d, c):
        pts = np.random.default_rng(seed).normal(size=(n, d))
        for metric in Metric:
            base = knn_distances(Dataset(pts), 1, metric).distances
            scaled = knn_distances(Dataset(pts * c), 1, metric).distances
            # rounding of c * x is relative to |x|, not to the distance
            tol = 1e-14 * c * np.abs(pts).max()
            assert np.allclose(scaled, c * base, rtol=1e-12, atol=tol)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.integers(1, 4), st.sampled_from(list(Metric)), st.integers(1, 5))
    def test_ball_count_duality(self, seed, n, d, metric, k):
        k = min(k, n - 1)
        pts = Dataset(np.random.default_rng(seed).normal(size=(n, d)))
        rho = knn_distances(pts, k, metric).distances
        for i in range(n):
            assert count_in_ball(pts, i, rho[i], metric) <= k - 1
            assert count_in_ball(pts, i, rho[i], metric, closed=True) >= k


class TestCountInBall:
    def test_examples(self):
        pts = Dataset([0.0, 1.0, 3.0])
        assert count_in_ball(pts, 0, 1.0) == 0
        assert count_in_ball(pts, 0, 1.0, closed=True) == 1
        assert count_in_ball(pts, 1, 2.5) == 2
        assert count_in_ball(pts, 0, 0.0) == 0

    def test_bad_index(self):
        with pytest.raises(ArityError):
            count_in_ball(Dataset([0.0, 1.0]), 2, 1.0)
