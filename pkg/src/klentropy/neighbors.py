"""Exact leave-one-out k-nearest-neighbour distances and ball counts.

Two search paths are provided and must agree bit-for-bit:

* ``"tree"``: a static k-d tree, bulk built once per dataset and queried in
  parallel with numba.
* ``"brute"``: an O(N^2) numpy scan, kept as the reference path.

Both evaluate the Euclidean distance as ``sqrt(sum_j (a_j - b_j)**2)`` with
the sum taken in coordinate order, so that the two agree exactly.
"""

import os
from dataclasses import dataclass

import numba
import numpy as np

from .core_math import Metric
from .errors import ArityError, DegenerateDataError, DomainError

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is often too old for numba and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_EUCLIDEAN = 0
_CHEBYSHEV = 1
_LEAF_SIZE = 16
_BRUTE_BLOCK = 1 << 22  # distance-matrix entries per block


@dataclass(frozen=True)
class Dataset:
    """N + 1 points in R^d, stored as a read-only float64 array of shape (N + 1, d)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C", copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ArityError(f"points must have shape (n, d), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ArityError("dataset is empty")
        if not np.all(np.isfinite(pts)):
            bad = np.flatnonzero(~np.all(np.isfinite(pts), axis=1))
            raise DomainError(f"non-finite coordinates at rows {bad[:10].tolist()}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n_points


def as_dataset(data):
    """Wrap an array-like as a :class:`Dataset`; datasets pass through."""
    if isinstance(data, Dataset):
        return data
    return Dataset(np.asarray(data, dtype=np.float64))


@dataclass(frozen=True)
class KnnResult:
    """Entry i is the distance from point i to its k-th nearest other point."""

    distances: np.ndarray
    k: int
    metric: Metric


def _metric_code(metric):
    return _CHEBYSHEV if Metric.parse(metric) is Metric.CHEBYSHEV else _EUCLIDEAN


# -- k-d tree -----------------------------------------------------------------


@numba.njit(cache=True)
def _build_tree(points, leaf_size):
    n, d = points.shape
    order = np.arange(n)
    max_nodes = 2 * (n // max(leaf_size, 1) + 1) * 2 + 1
    start = np.empty(max_nodes, np.int64)
    stop = np.empty(max_nodes, np.int64)
    split_dim = np.full(max_nodes, -1, np.int64)
    split_val = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)

    start[0] = 0
    stop[0] = n
    n_nodes = 1
    stack = np.empty(max_nodes, np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        lo = start[node]
        hi = stop[node]
        if hi - lo <= leaf_size:
            continue
        # split on the coordinate of largest spread
        best_dim = 0
        best_spread = -1.0
        for j in range(d):
            cmin = np.inf
            cmax = -np.inf
            for t in range(lo, hi):
                v = points[order[t], j]
                if v < cmin:
                    cmin = v
                if v > cmax:
                    cmax = v
            if cmax - cmin > best_spread:
                best_spread = cmax - cmin
                best_dim = j
        if best_spread <= 0.0:
            continue  # all points coincide; keep as an oversized leaf
        seg = order[lo:hi].copy()
        keys = np.empty(hi - lo, np.float64)
        for t in range(hi - lo):
            keys[t] = points[seg[t], best_dim]
        perm = np.argsort(keys, kind="mergesort")
        for t in range(hi - lo):
            order[lo + t] = seg[perm[t]]
        mid = lo + (hi - lo) // 2
        split_dim[node] = best_dim
        split_val[node] = points[order[mid], best_dim]

        a = n_nodes
        b = n_nodes + 1
        n_nodes += 2
        start[a] = lo
        stop[a] = mid
        start[b] = mid
        stop[b] = hi
        left[node] = a
        right[node] = b
        stack[top] = a
        stack[top + 1] = b
        top += 2
    return (
        order,
        start[:n_nodes].copy(),
        stop[:n_nodes].copy(),
        split_dim[:n_nodes].copy(),
        split_val[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
    )


@numba.njit(cache=True, inline="always")
def _dist(points, a, b, metric):
    d = points.shape[1]
    if metric == _CHEBYSHEV:
        best = 0.0
        for j in range(d):
            t = abs(points[a, j] - points[b, j])
            if t > best:
                best = t
        return best
    acc = 0.0
    for j in range(d):
        t = points[a, j] - points[b, j]
        acc += t * t
    return np.sqrt(acc)


@numba.njit(cache=True, parallel=True)
def _tree_knn(points, k, metric, order, start, stop, split_dim, split_val, left, right):
    n = points.shape[0]
    out = np.empty(n, np.float64)
    n_nodes = start.shape[0]
    for i in numba.prange(n):
        best = np.full(k, np.inf)
        stack_node = np.empty(n_nodes, np.int64)
        stack_bound = np.empty(n_nodes, np.float64)
        stack_node[0] = 0
        stack_bound[0] = 0.0
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            bound = stack_bound[top]
            # strict test: a point at exactly the current k-th distance
            # cannot change the k-th order statistic
            if bound > best[k - 1]:
                continue
            dim = split_dim[node]
            if dim < 0:
                for t in range(start[node], stop[node]):
                    j = order[t]
                    if j == i:
                        continue
                    dist = _dist(points, i, j, metric)
                    if dist < best[k - 1]:
                        pos = k - 1
                        while pos > 0 and best[pos - 1] > dist:
                            best[pos] = best[pos - 1]
                            pos -= 1
                        best[pos] = dist
                continue
            diff = points[i, dim] - split_val[node]
            if diff < 0.0:
                near = left[node]
                far = right[node]
                gap = -diff
            else:
                near = right[node]
                far = left[node]
                gap = diff
            far_bound = gap if gap > bound else bound
            stack_node[top] = far
            stack_bound[top] = far_bound
            stack_node[top + 1] = near
            stack_bound[top + 1] = bound
            top += 2
        out[i] = best[k - 1]
    return out


class KDTree:
    """Static k-d tree over a dataset; immutable once built."""

    def __init__(self, data, leaf_size=_LEAF_SIZE):
        self.data = as_dataset(data)
        self.leaf_size = int(leaf_size)
        self._arrays = _build_tree(self.data.points, self.leaf_size)

    @property
    def n_nodes(self):
        return self._arrays[1].shape[0]

    def knn_distances(self, k, metric=Metric.EUCLIDEAN):
        """Leave-one-out k-th neighbour distance for every point in the tree."""
        return _tree_knn(self.data.points, int(k), _metric_code(metric), *self._arrays)


# -- brute force --------------------------------------------------------------


def _brute_knn(points, k, metric):
    n, d = points.shape
    out = np.empty(n)
    block = max(1, _BRUTE_BLOCK // max(n, 1))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        if metric == _CHEBYSHEV:
            dist = np.zeros((hi - lo, n))
            for j in range(d):
                np.maximum(dist, np.abs(points[lo:hi, j, None] - points[None, :, j]), out=dist)
        else:
            dist = np.zeros((hi - lo, n))
            for j in range(d):
                t = points[lo:hi, j, None] - points[None, :, j]
                dist += t * t
            np.sqrt(dist, out=dist)
        rows = np.arange(hi - lo)
        dist[rows, rows + lo] = np.inf
        out[lo:hi] = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return out


# -- public operations --------------------------------------------------------


def knn_distances(data, k, metric=Metric.EUCLIDEAN, method="tree"):
    """Exact distance from each point to its k-th nearest neighbour among the
    other points.

    Raises :class:`ArityError` unless ``1 <= k < n_points`` and
    :class:`DegenerateDataError` when some point has k or more exact copies.
    """
    data = as_dataset(data)
    metric = Metric.parse(metric)
    k = int(k)
    if k < 1 or k >= data.n_points:
        raise ArityError(f"k must satisfy 1 <= k < n_points={data.n_points}, got k={k}")
    if method == "tree":
        dist = KDTree(data).knn_distances(k, metric)
    elif method == "brute":
        dist = _brute_knn(data.points, k, _metric_code(metric))
    else:
        raise DomainError(f"unknown search method {method!r}")
    zero = np.flatnonzero(dist == 0.0)
    if zero.size:
        shown = zero[:10].tolist()
        more = f" (and {zero.size - 10} more)" if zero.size > 10 else ""
        raise DegenerateDataError(
            f"duplicate points: rows {shown}{more} have a zero distance "
            f"to their {k}-th nearest neighbour",
            indices=zero,
        )
    return KnnResult(distances=dist, k=k, metric=metric)


def count_in_ball(data, center_index, radius, metric=Metric.EUCLIDEAN, closed=False):
    """Number of points other than ``center_index`` within ``radius`` of it.

    The ball is open (strict inequality) unless ``closed`` is set.
    """
    data = as_dataset(data)
    i = int(center_index)
    if not 0 <= i < data.n_points:
        raise ArityError(f"center index {i} out of range [0, {data.n_points})")
    if radius < 0:
        raise DomainError(f"radius must be nonnegative, got {radius}")
    dist = Metric.parse(metric).distance(data.points, data.points[i])
    inside = dist <= radius if closed else dist < radius
    inside[i] = False
    return int(np.count_nonzero(inside))


def set_threads(n):
    """Number of worker threads used by the tree queries; None restores the default."""
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(limit if n is None else max(1, min(int(n), limit)))
