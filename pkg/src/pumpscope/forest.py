"""Random forest of Gini decision trees for binary labels."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pumpscope.errors import DataError, ValidationError
from pumpscope.seeding import derive_seed


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: Optional[int] = None
    min_leaf: int = 2
    features_per_split: Optional[int] = None  # default ceil(sqrt(F))
    bootstrap: bool = True

    def mtry(self, n_features):
        if self.features_per_split is None:
            return max(1, math.ceil(math.sqrt(n_features)))
        return max(1, min(n_features, self.features_per_split))


@dataclass(eq=False)
class DecisionTree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    prob: np.ndarray       # P(class 1) at each node
    node_bounds: list = field(default_factory=list)  # (lo, hi) observed around each threshold

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict_proba(self, X):
        p = self.prob[self.apply(X)]
        return np.column_stack([1.0 - p, p])

    @property
    def n_nodes(self):
        return len(self.feature)


def _best_split(X, y, feats, min_leaf):
    """Lowest weighted Gini split over ``feats``; returns (feature, threshold, lo, hi) or None."""
    n = len(y)
    sub = X[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order]
    pos_left = np.cumsum(ys, axis=0)[:-1]              # left sizes 1..n-1
    n_left = np.arange(1, n)[:, None].astype(float)
    n_right = n - n_left
    pos_right = ys.sum(axis=0) - pos_left
    p_l = pos_left / n_left
    p_r = pos_right / n_right
    gini = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not np.any(valid):
        return None
    gini = np.where(valid, gini, np.inf)
    flat = int(np.argmin(gini))  # row-major: ties go to the smallest left size, then feature order
    i, j = divmod(flat, len(feats))
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(feats[j]), float(thr), float(lo), float(hi)


def build_tree(X, y, params, rng):
    n_features = X.shape[1]
    mtry = params.mtry(n_features)
    feature, threshold, left, right, prob, bounds = [], [], [], [], [], []

    def new_node(p):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        prob.append(p)
        bounds.append(None)
        return len(feature) - 1

    root = new_node(float(np.mean(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yy = y[idx]
        p = prob[node]
        if p in (0.0, 1.0) or len(idx) < 2 * params.min_leaf:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        feats = rng.choice(n_features, size=mtry, replace=False)
        split = _best_split(X[idx], yy, feats, params.min_leaf)
        if split is None:
            continue
        f, thr, lo, hi = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        ln, rn = new_node(float(np.mean(y[li]))), new_node(float(np.mean(y[ri])))
        feature[node], threshold[node], left[node], right[node] = f, thr, ln, rn
        bounds[node] = (lo, hi)
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                        np.array(prob), bounds)


@dataclass(eq=False)
class ForestModel:
    trees: list
    params: ForestParams
    seed: int
    n_features: int

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValidationError(f"expected {self.n_features} features, got {X.shape[1]}")
        p = np.mean([t.predict_proba(X)[:, 1] for t in self.trees], axis=0)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def train_forest(X, y, params=ForestParams(), seed=0):
    """Bootstrap-aggregated Gini trees; tree ``i`` draws from ``derive_seed(seed, i)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValidationError("X must be 2-D with one row per label")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValidationError("labels must be 0/1")
    if y.min() == y.max():
        raise DataError("single-class input: random forest needs both labels")
    if params.n_trees < 1 or params.min_leaf < 1:
        raise ValidationError("n_trees and min_leaf must be >= 1")
    trees = []
    n = len(y)
    for i in range(params.n_trees):
        rng = np.random.default_rng(derive_seed(seed, "tree", i))
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(build_tree(X[idx], y[idx], params, rng))
    return ForestModel(trees, params, seed, X.shape[1])
