"""Bagged Gini trees with per-node random feature subsets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .tree import DecisionTree, Presorted, as_mask, as_matrix, grow


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(n_features))))
    if max_features == "log2":
        return max(1, int(math.floor(math.log2(n_features))))
    if isinstance(max_features, float):
        return max(1, min(n_features, int(max_features * n_features)))
    return max(1, min(n_features, int(max_features)))


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    classes: np.ndarray
    n_features: int
    features_per_split: int
    bootstrap: bool
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def votes(self, X, missing_mask=None) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"forest was fit on {self.n_features} features, got {X.shape[1]}")
        counts = np.zeros((X.shape[0], len(self.classes)))
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            hist = tree.value[tree.apply(X, missing_mask)]
            counts[rows, np.argmax(hist, axis=1)] += 1
        return counts

    def predict_proba(self, X, missing_mask=None) -> np.ndarray:
        return self.votes(X, missing_mask) / len(self.trees)

    def predict(self, X, missing_mask=None) -> np.ndarray:
        # argmax returns the first maximum, so vote ties go to the smaller code
        return self.classes[np.argmax(self.votes(X, missing_mask), axis=1)]


def fit_random_forest(X, y, *, n_trees=300, features_per_split="sqrt", bootstrap=True,
                      max_depth=None, min_samples_leaf=1, seed=0, missing_mask=None,
                      classes=None) -> RandomForest:
    """Fit a random forest of fully grown Gini trees.

    Tree ``t`` draws its bootstrap sample and feature subsets from a stream
    seeded by ``(seed, t)``, so a tree does not depend on how many others
    are grown.
    """
    X = as_matrix(X)
    y = np.asarray(y)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot fit a forest on zero samples")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    classes = np.unique(y) if classes is None else np.asarray(classes)
    yi = np.searchsorted(classes, y)
    mtry = resolve_max_features(features_per_split, d)
    mask = as_mask(missing_mask, X.shape)
    XT = X.T.copy() if mtry < d else None
    presorted = Presorted.build(X, mask) if mtry >= d else None
    onehot = np.zeros((n, len(classes)))
    onehot[np.arange(n), yi] = 1.0

    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        if bootstrap:
            counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            counts = np.ones(n)
        out = grow(X, mask, onehot * counts[:, None], counts, mode=_kernels.GINI,
                   max_depth=max_depth, min_samples_leaf=min_samples_leaf, mtry=mtry,
                   seed=int(rng.integers(2**31)), presorted=presorted, XT=XT)
        feature, threshold, mleft, left, right, node_stat, node_cnt, gain, _, _ = out
        trees.append(DecisionTree(feature=feature, threshold=threshold, missing_left=mleft,
                                  left=left, right=right, value=node_stat, n_samples=node_cnt,
                                  gain=gain, n_features=d, classes=classes))
    params = dict(n_trees=n_trees, features_per_split=features_per_split, bootstrap=bootstrap,
                  max_depth=max_depth, min_samples_leaf=min_samples_leaf)
    return RandomForest(trees=trees, classes=classes, n_features=d, features_per_split=mtry,
                        bootstrap=bootstrap, seed=seed, params=params)
