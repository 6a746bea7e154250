"""Random forests over hand-built CART trees.

Each tree is grown on a bootstrap resample with a fresh random subset
of round(sqrt(p)) candidate features per split.  Regression trees
maximise the variance reduction of a split, classification trees the
Gini impurity reduction; leaves store the training mean or the raw
class frequencies (which can be exactly zero, no smoothing).  Trees are
seeded individually from the forest seed, so refitting with the same
seed reproduces predictions bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import MissingClass, NonFinite, ShapeMismatch
from .base import validate_features


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            rows = np.nonzero(feat >= 0)[0]
            if rows.size == 0:
                break
            cur = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]


def _grow_tree(X, target, rng, max_depth, min_leaf, mtry, leaf_value, is_pure, split_score):
    n, p = X.shape
    feature, threshold, left, right, values = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        values.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        node_target = target[idx]
        if (
            (max_depth is not None and depth >= max_depth)
            or idx.size < 2 * min_leaf
            or is_pure(node_target)
        ):
            values[slot] = leaf_value(node_target)
            continue
        best = None
        for f in rng.permutation(p)[:mtry]:
            xv = X[idx, f]
            order = np.argsort(xv, kind="stable")
            xs = xv[order]
            scores = split_score(node_target[order])
            # A boundary i splits [0, i) from [i, n); both sides must
            # hold min_leaf rows and the feature value must change.
            lo, hi = min_leaf, idx.size - min_leaf
            if lo >= hi + 1:
                continue
            cand = np.arange(lo, hi + 1)
            cand = cand[xs[cand - 1] < xs[cand]]
            if cand.size == 0:
                continue
            s = scores[cand - 1]
            j = int(np.argmax(s))
            if best is None or s[j] > best[0]:
                i = int(cand[j])
                best = (float(s[j]), f, 0.5 * (xs[i - 1] + xs[i]))
        if best is None:
            values[slot] = leaf_value(node_target)
            continue
        _, f, thr = best
        go_left = X[idx, f] <= thr
        ls, rs = new_node(), new_node()
        feature[slot] = int(f)
        threshold[slot] = thr
        left[slot] = ls
        right[slot] = rs
        stack.append((idx[go_left], depth + 1, ls))
        stack.append((idx[~go_left], depth + 1, rs))

    # Internal slots never feed predictions; fill them with zeros of the
    # leaf-value shape so the array is rectangular.
    proto = np.zeros_like(np.asarray(next(v for v in values if v is not None), dtype=float))
    value_arr = np.asarray([v if v is not None else proto for v in values], dtype=float)
    return _Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        value_arr,
    )


def _regression_kit():
    def leaf_value(y):
        return float(y.mean())

    def is_pure(y):
        return y.max() == y.min()

    def split_score(y_sorted):
        # sum_L^2/n_L + sum_R^2/n_R at every boundary; maximising it
        # maximises the variance reduction of the split.
        n = y_sorted.size
        csum = np.cumsum(y_sorted)
        total = csum[-1]
        nl = np.arange(1, n)
        sl = csum[:-1]
        return sl * sl / nl + (total - sl) ** 2 / (n - nl)

    return leaf_value, is_pure, split_score


def _classification_kit(n_classes):
    def leaf_value(y):
        return np.bincount(y.astype(int), minlength=n_classes) / y.size

    def is_pure(y):
        return y.max() == y.min()

    def split_score(y_sorted):
        # sum_c count^2/n on each side; maximising it minimises the
        # weighted Gini impurity of the children.
        n = y_sorted.size
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_sorted.astype(int)] = 1.0
        ccum = np.cumsum(onehot, axis=0)
        total = ccum[-1]
        nl = np.arange(1, n)[:, None]
        cl = ccum[:-1]
        cr = total - cl
        return (cl * cl / nl).sum(axis=1) + (cr * cr / (n - nl)).sum(axis=1)

    return leaf_value, is_pure, split_score


def _default_mtry(p: int) -> int:
    return max(1, int(round(np.sqrt(p))))


@dataclass
class ForestRegressorFit:
    trees: list
    p: int

    def predict(self, X) -> np.ndarray:
        X = validate_features(X, p=self.p)
        if not self.trees:
            raise ShapeMismatch("forest has no trees")
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


@dataclass
class ForestClassifierFit:
    trees: list
    p: int
    n_classes: int

    def predict_proba(self, X) -> np.ndarray:
        X = validate_features(X, p=self.p)
        if not self.trees:
            raise ShapeMismatch("forest has no trees")
        out = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


def _bootstrap_trees(X, target, n_trees, seed, grow, bootstrap):
    trees = []
    n = X.shape[0]
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
        bidx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(grow(X[bidx], target[bidx], rng))
    return trees


def fit_forest_regressor(
    X,
    y,
    n_trees: int = 100,
    max_depth: int | None = 10,
    min_leaf: int = 5,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestRegressorFit:
    X = validate_features(X)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise ShapeMismatch("y must be 1-d and match X rows")
    if not np.all(np.isfinite(y)):
        raise NonFinite("y contains non-finite values")
    if n_trees < 1 or min_leaf < 1:
        raise ValueError("n_trees and min_leaf must be >= 1")
    leaf_value, is_pure, split_score = _regression_kit()
    mtry = _default_mtry(X.shape[1])

    def grow(Xb, yb, rng):
        return _grow_tree(Xb, yb, rng, max_depth, min_leaf, mtry, leaf_value, is_pure, split_score)

    return ForestRegressorFit(
        trees=_bootstrap_trees(X, y, n_trees, seed, grow, bootstrap), p=X.shape[1]
    )


def fit_forest_classifier(
    X,
    d,
    n_classes: int | None = None,
    n_trees: int = 100,
    max_depth: int | None = 10,
    min_leaf: int = 5,
    seed: int = 0,
    bootstrap: bool = True,
) -> ForestClassifierFit:
    X = validate_features(X)
    d = np.asarray(d)
    if d.shape != (X.shape[0],):
        raise ShapeMismatch("labels must match X rows")
    labels = d.astype(int)
    if np.any(labels != d) or labels.min() < 0:
        raise ValueError("labels must be non-negative integers")
    k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    present = np.bincount(labels, minlength=k) > 0
    if labels.max() >= k or not present.all():
        missing = [i for i in range(k) if i >= present.size or not present[i]]
        raise MissingClass(f"classes absent from the training labels: {missing}")
    if n_trees < 1 or min_leaf < 1:
        raise ValueError("n_trees and min_leaf must be >= 1")
    leaf_value, is_pure, split_score = _classification_kit(k)
    mtry = _default_mtry(X.shape[1])

    def grow(Xb, yb, rng):
        return _grow_tree(Xb, yb, rng, max_depth, min_leaf, mtry, leaf_value, is_pure, split_score)

    return ForestClassifierFit(
        trees=_bootstrap_trees(X, labels.astype(float), n_trees, seed, grow, bootstrap),
        p=X.shape[1],
        n_classes=k,
    )
