"""Multiclass AdaBoost (SAMME) over shallow Gini trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tree import DecisionTree, Presorted, as_mask, as_matrix, fit_tree

# stand-in error for a perfect stage, keeps its alpha finite
PERFECT_STAGE_ERROR = 1e-10


def samme_alpha(error: float, n_classes: int) -> float:
    """Stage weight ``ln((1 - err) / err) + ln(K - 1)``."""
    if not 0.0 < error < 1.0:
        raise ValueError(f"stage error must lie in (0, 1), got {error}")
    return math.log((1.0 - error) / error) + math.log(n_classes - 1)


@dataclass
class Stage:
    tree: DecisionTree
    alpha: float
    error: float


@dataclass
class AdaBoost:
    stages: list[Stage]
    classes: np.ndarray
    n_features: int
    max_stages: int
    params: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def decision(self, X, missing_mask=None) -> np.ndarray:
        """Per-class sum of the alphas of the stages voting for that class."""
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"model was fit on {self.n_features} features, got {X.shape[1]}")
        score = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for stage in self.stages:
            pred = np.searchsorted(self.classes, stage.tree.predict(X, missing_mask))
            score[rows, pred] += stage.alpha
        return score

    def predict_proba(self, X, missing_mask=None) -> np.ndarray:
        score = self.decision(X, missing_mask)
        total = sum(stage.alpha for stage in self.stages)
        if total <= 0:
            return np.full_like(score, 1.0 / self.n_classes)
        return score / total

    def predict(self, X, missing_mask=None) -> np.ndarray:
        return self.classes[np.argmax(self.decision(X, missing_mask), axis=1)]


def fit_adaboost(X, y, *, max_stages=200, max_depth=2, seed=0, missing_mask=None,
                 classes=None) -> AdaBoost:
    """Fit SAMME boosting.

    A stage whose weighted error reaches ``(K - 1) / K`` is discarded and
    boosting stops; a perfect stage is kept with a capped alpha and
    boosting stops.
    """
    X = as_matrix(X)
    y = np.asarray(y)
    n, d = X.shape
    classes = np.unique(y) if classes is None else np.asarray(classes)
    K = len(classes)
    if K < 2:
        raise ValueError("AdaBoost needs at least two classes")
    mask = as_mask(missing_mask, X.shape)
    presorted = Presorted.build(X, mask)
    w = np.full(n, 1.0 / n)
    stages = []
    for t in range(max_stages):
        tree = fit_tree(X, y, w, max_depth=max_depth, missing_mask=missing_mask,
                        seed=seed + t, classes=classes, presorted=presorted)
        wrong = tree.predict(X, missing_mask) != y
        err = float(w[wrong].sum() / w.sum())
        if err >= (K - 1) / K:
            break
        if err <= 0.0:
            stages.append(Stage(tree, samme_alpha(PERFECT_STAGE_ERROR, K), 0.0))
            break
        alpha = samme_alpha(err, K)
        stages.append(Stage(tree, alpha, err))
        w = w * np.exp(alpha * wrong)
        w /= w.sum()
    params = dict(max_stages=max_stages, max_depth=max_depth)
    return AdaBoost(stages=stages, classes=classes, n_features=d, max_stages=max_stages,
                    params=params)
