"""Gini impurity, mean-decrease-in-impurity importances, and top-k selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .models.forest import RandomForest


def gini_impurity(proportions) -> float:
    p = np.asarray(proportions, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("proportions must be a non-negative vector summing to 1")
    return float(1.0 - np.sum(p * p))


@dataclass
class ImportanceVector:
    scores: np.ndarray
    feature_names: list[str]
    normalized: bool

    def ranked(self) -> list[tuple[str, float]]:
        """(name, score) by descending score, ties by original position."""
        order = np.lexsort((np.arange(len(self.scores)), -self.scores))
        return [(self.feature_names[i], float(self.scores[i])) for i in order]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "importance"])
            for name, score in self.ranked():
                w.writerow([name, repr(score)])


def tree_mdi(tree, n_features: int) -> np.ndarray:
    """Per-feature sum of (node weight / root weight) * impurity decrease."""
    weight = tree.value.sum(axis=1)
    out = np.zeros(n_features)
    internal = np.flatnonzero(tree.left >= 0)
    np.add.at(out, tree.feature[internal], weight[internal] / weight[0] * tree.gain[internal])
    return out


def mdi_importances(forest: RandomForest, feature_names=None,
                    normalize: bool = True) -> ImportanceVector:
    """Mean decrease in impurity averaged over the forest's trees."""
    if forest is None or not getattr(forest, "trees", None):
        raise ValueError("forest is not trained")
    d = forest.n_features
    total = np.zeros(d)
    for tree in forest.trees:
        total += tree_mdi(tree, d)
    scores = total / len(forest.trees)
    if normalize and scores.sum() > 0:
        scores = scores / scores.sum()
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(d)]
    if len(names) != d:
        raise ValueError(f"{len(names)} names for {d} features")
    return ImportanceVector(scores, names, normalize)


def select_top_k(imp: ImportanceVector, k: int = 100) -> list[str]:
    """Top ``k`` names by score; equal scores keep the lower original index first."""
    if k <= 0:
        raise ValueError("k must be positive")
    return [name for name, _ in imp.ranked()[:k]]
