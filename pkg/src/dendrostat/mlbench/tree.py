"""Regression trees and bagged random forests."""

import math

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

LEAF = -1


@njit(cache=True, nogil=True)
def _build(X, y, rows, max_depth, min_leaf, max_features, seed):
    """Grow a variance-reduction tree on training rows ``rows`` (may repeat).

    Returns parallel node arrays (feature, threshold, left, right, value);
    feature == -1 marks a leaf.  When ``max_features`` is below the number of
    columns a sorted random subset is drawn per node from a generator seeded
    with ``seed``; otherwise no random numbers are used.
    """
    np.random.seed(seed)
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    idx = rows.copy()
    buf = np.empty(n, dtype=np.int64)
    stack = np.empty((cap, 4), dtype=np.int64)  # node, start, end, depth
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    all_feats = np.arange(d)
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start
        total = 0.0
        for k in range(start, end):
            total += y[idx[k]]
        value[node] = total / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        if max_features < d:
            feats = np.sort(np.random.permutation(d)[:max_features])
        else:
            feats = all_feats
        parent = total * total / m
        best_score = parent + 1e-12 * abs(parent) + 1e-300
        best_f = -1
        best_thr = 0.0
        xs = np.empty(m)
        ys = np.empty(m)
        for f in feats:
            for k in range(m):
                xs[k] = X[idx[start + k], f]
            order = np.argsort(xs, kind="mergesort")
            xsort = xs[order]
            for k in range(m):
                ys[k] = y[idx[start + order[k]]]
            s_left = 0.0
            for i in range(1, m):
                s_left += ys[i - 1]
                if i < min_leaf or m - i < min_leaf:
                    continue
                if not xsort[i - 1] < xsort[i]:
                    continue
                s_right = total - s_left
                score = s_left * s_left / i + s_right * s_right / (m - i)
                if score > best_score:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (xsort[i - 1] + xsort[i])
                    if not thr < xsort[i]:
                        thr = xsort[i - 1]
                    best_thr = thr
        if best_f < 0:
            continue
        nl = 0
        nr = 0
        for k in range(start, end):
            r = idx[k]
            if X[r, best_f] <= best_thr:
                idx[start + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for k in range(nr):
            idx[start + nl + k] = buf[k]
        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        stack[top, 0] = rnode
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lnode
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True, nogil=True)
def _predict(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _seed32(seed_seq):
    return int(seed_seq.generate_state(1, dtype=np.uint32)[0])


class RegressionTree(RegressorMixin, BaseEstimator):
    """Binary regression tree grown by greedy variance reduction.

    Parameters
    ----------
    max_depth : int or None
        Depth limit; ``None`` grows until ``min_samples_leaf`` stops splitting.
    min_samples_leaf : int
        Minimum training rows on each side of a split.
    max_features : int or None
        Columns examined per split; ``None`` examines all.
    """

    def __init__(self, max_depth=6, min_samples_leaf=5, max_features=None, random_state=0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def _grow(self, X, y, rows, seed):
        d = X.shape[1]
        mf = d if self.max_features is None else int(self.max_features)
        if not 1 <= mf <= d:
            raise ValueError(f"max_features must lie in 1..{d}")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        depth = -1 if self.max_depth is None else int(self.max_depth)
        return _build(
            np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(y, dtype=float),
            np.asarray(rows, dtype=np.int64), depth, int(self.min_samples_leaf), mf, seed,
        )

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        seed = _seed32(np.random.SeedSequence(int(self.random_state or 0)))
        self.tree_ = self._grow(X, y, np.arange(X.shape[0]), seed)
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = validate_data(self, X, reset=False)
        return _predict(np.ascontiguousarray(X), *self.tree_)


class RandomForest(RegressorMixin, BaseEstimator):
    """Bagged regression trees with a random column subset at every split.

    Tree ``t`` draws its bootstrap sample and split subsets from
    ``SeedSequence(random_state, spawn_key=(t,))``.

    Parameters
    ----------
    n_estimators : int
        Number of trees.
    max_features : int or None
        Columns per split; ``None`` means ceil(d / 3).
    """

    def __init__(self, n_estimators=500, max_features=None, min_samples_leaf=5,
                 max_depth=None, bootstrap=True, random_state=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        n, d = X.shape
        mf = math.ceil(d / 3) if self.max_features is None else int(self.max_features)
        proto = RegressionTree(self.max_depth, self.min_samples_leaf, mf)
        self.max_features_ = mf
        self.trees_ = []
        for t in range(self.n_estimators):
            ss = np.random.SeedSequence(int(self.random_state or 0), spawn_key=(t,))
            rng = np.random.default_rng(ss)
            rows = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            self.trees_.append(proto._grow(X, y, rows, _seed32(ss.spawn(1)[0])))
        return self

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = np.ascontiguousarray(validate_data(self, X, reset=False))
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total += _predict(X, *tree)
        return total / len(self.trees_)
