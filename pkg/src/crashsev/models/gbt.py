"""Gradient-boosted trees with a softmax objective and second-order leaf weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .tree import DecisionTree, Presorted, as_mask, as_matrix, grow

HESSIAN_FLOOR = 1e-16


def soft_threshold(g, alpha):
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


def leaf_weight(G, H, lambda_l2=1.0, alpha_l1=0.0):
    """Optimal leaf weight ``-soft_threshold(G, alpha) / (H + lambda)``."""
    return -soft_threshold(G, alpha_l1) / (H + lambda_l2)


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def log_loss(proba: np.ndarray, yi: np.ndarray) -> float:
    p = proba[np.arange(len(yi)), yi]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


@dataclass
class GradientBoosting:
    """Per-round lists of one regression tree per class.

    Tree ``value`` holds unscaled leaf weights; the learning rate is applied
    at prediction time. ``node_grad`` keeps each node's (G, H) sums.
    """

    rounds: list[list[DecisionTree]]
    classes: np.ndarray
    n_features: int
    learning_rate: float
    lambda_l2: float
    alpha_l1: float
    gamma_min_gain: float
    max_depth: int
    base_score: float
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    best_round: int | None = None
    params: dict = field(default_factory=dict)

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    def decision(self, X, missing_mask=None) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"model was fit on {self.n_features} features, got {X.shape[1]}")
        mask = as_mask(missing_mask, X.shape)
        F = np.full((X.shape[0], len(self.classes)), float(self.base_score))
        for trees in self.rounds:
            for k, tree in enumerate(trees):
                leaves = _kernels.apply_tree(X, mask, tree.feature, tree.threshold,
                                             tree.missing_left, tree.left, tree.right)
                F[:, k] += self.learning_rate * tree.value[leaves]
        return F

    def predict_proba(self, X, missing_mask=None) -> np.ndarray:
        return softmax(self.decision(X, missing_mask))

    def predict(self, X, missing_mask=None) -> np.ndarray:
        # argmax of the probabilities, not the raw scores, so near-ties agree with predict_proba
        return self.classes[np.argmax(self.predict_proba(X, missing_mask), axis=1)]


def prune(tree: DecisionTree, gamma: float) -> bool:
    """Collapse, bottom-up, every split whose children are leaves and whose gain is below ``gamma``.

    Returns whether anything was pruned.
    """
    changed = False
    # children always carry larger ids than their parent
    for nd in range(tree.n_nodes - 1, -1, -1):
        l, r = tree.left[nd], tree.right[nd]
        if l < 0 or tree.left[l] >= 0 or tree.left[r] >= 0:
            continue
        if tree.gain[nd] < gamma:
            tree.left[nd] = tree.right[nd] = -1
            tree.feature[nd] = -1
            tree.gain[nd] = 0.0
            changed = True
    return changed


def _fit_class_tree(X, mask, g, h, *, max_depth, lambda_l2, alpha_l1, gamma, presorted):
    stat = np.column_stack((g, h))
    out = grow(X, mask, stat, np.ones(len(g)), mode=_kernels.NEWTON, max_depth=max_depth,
               lam=lambda_l2, alpha=alpha_l1, presorted=presorted)
    feature, threshold, mleft, left, right, node_stat, node_cnt, gain, _, row_leaf = out
    tree = DecisionTree(feature=feature.copy(), threshold=threshold, missing_left=mleft,
                        left=left.copy(), right=right.copy(), value=np.empty(0),
                        n_samples=node_cnt, gain=gain.copy(), n_features=X.shape[1],
                        node_grad=node_stat)
    if gamma > 0 and prune(tree, gamma):
        row_leaf = _kernels.apply_tree(X, mask, tree.feature, tree.threshold,
                                       tree.missing_left, tree.left, tree.right)
    tree.value = leaf_weight(node_stat[:, 0], node_stat[:, 1], lambda_l2, alpha_l1)
    return tree, row_leaf


def fit_gbt(X, y, missing_mask=None, *, n_rounds=300, learning_rate=0.1, lambda_l2=1.0,
            alpha_l1=0.0, gamma_min_gain=0.0, max_depth=6, base_score=0.0, seed=0,
            X_valid=None, y_valid=None, valid_mask=None, early_stopping_rounds=20,
            classes=None) -> GradientBoosting:
    """Fit softmax gradient boosting with exact greedy trees.

    Each round fits one tree per class to the gradient ``p - y`` and hessian
    ``p (1 - p)`` of the cross-entropy. When a validation set is given,
    boosting stops after ``early_stopping_rounds`` rounds without a
    validation log-loss improvement and the model is truncated to the best
    round. ``seed`` is accepted for interface symmetry; the fit is
    deterministic.
    """
    X = as_matrix(X)
    y = np.asarray(y)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot fit on zero samples")
    if lambda_l2 < 0 or alpha_l1 < 0 or gamma_min_gain < 0:
        raise ValueError("regularization parameters must be >= 0")
    classes = np.unique(y) if classes is None else np.asarray(classes)
    K = len(classes)
    yi = np.searchsorted(classes, y)
    Y = np.zeros((n, K))
    Y[np.arange(n), yi] = 1.0
    mask = as_mask(missing_mask, X.shape)
    presorted = Presorted.build(X, mask)

    use_valid = X_valid is not None and early_stopping_rounds
    if use_valid:
        X_valid = as_matrix(X_valid)
        vmask = as_mask(valid_mask, X_valid.shape)
        vyi = np.searchsorted(classes, np.asarray(y_valid))
        F_valid = np.full((X_valid.shape[0], K), float(base_score))

    model = GradientBoosting(rounds=[], classes=classes, n_features=d,
                             learning_rate=learning_rate, lambda_l2=lambda_l2,
                             alpha_l1=alpha_l1, gamma_min_gain=gamma_min_gain,
                             max_depth=max_depth, base_score=base_score,
                             params=dict(n_rounds=n_rounds, learning_rate=learning_rate,
                                         lambda_l2=lambda_l2, alpha_l1=alpha_l1,
                                         gamma_min_gain=gamma_min_gain, max_depth=max_depth,
                                         base_score=base_score,
                                         early_stopping_rounds=early_stopping_rounds))
    F = np.full((n, K), float(base_score))
    P = softmax(F)
    model.train_loss.append(log_loss(P, yi))
    best = np.inf
    best_round = 0
    for rnd in range(n_rounds):
        G = P - Y
        Hs = np.maximum(P * (1.0 - P), HESSIAN_FLOOR)
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(Hs))):
            raise FloatingPointError(f"non-finite gradients at round {rnd}")
        trees = []
        for k in range(K):
            tree, row_leaf = _fit_class_tree(X, mask, G[:, k], Hs[:, k], max_depth=max_depth,
                                             lambda_l2=lambda_l2, alpha_l1=alpha_l1,
                                             gamma=gamma_min_gain, presorted=presorted)
            F[:, k] += learning_rate * tree.value[row_leaf]
            trees.append(tree)
        model.rounds.append(trees)
        P = softmax(F)
        model.train_loss.append(log_loss(P, yi))
        if use_valid:
            for k, tree in enumerate(trees):
                leaves = _kernels.apply_tree(X_valid, vmask, tree.feature, tree.threshold,
                                             tree.missing_left, tree.left, tree.right)
                F_valid[:, k] += learning_rate * tree.value[leaves]
            loss = log_loss(softmax(F_valid.copy()), vyi)
            model.valid_loss.append(loss)
            if loss < best:
                best = loss
                best_round = rnd + 1
            elif rnd + 1 - best_round >= early_stopping_rounds:
                break
    if use_valid:
        model.rounds = model.rounds[:best_round]
        model.best_round = best_round
    return model
