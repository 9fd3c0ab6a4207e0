"""Single decision trees on top of the level-wise split kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

_NO_MASK = np.zeros((0, 0), dtype=bool)
_NO_XT = np.zeros((0, 0), dtype=np.float64)


def as_mask(mask, shape) -> np.ndarray:
    """Normalize an optional missingness mask for the kernels."""
    if mask is None:
        return _NO_MASK
    mask = np.ascontiguousarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ValueError(f"missing mask shape {mask.shape} does not match data {shape}")
    if not mask.any():
        return _NO_MASK
    return mask


def as_matrix(X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class Presorted:
    """Per-column sorted nonzero entries; reusable across trees fit on the same X."""

    col_ptr: np.ndarray
    col_rows: np.ndarray
    col_vals: np.ndarray
    col_neg: np.ndarray
    miss_ptr: np.ndarray
    miss_rows: np.ndarray

    @classmethod
    def build(cls, X: np.ndarray, mask: np.ndarray) -> "Presorted":
        return cls(*_kernels.presort_columns(X, mask))


_EMPTY_PRESORT = Presorted(
    col_ptr=np.zeros(1, np.int64), col_rows=np.zeros(0, np.int32),
    col_vals=np.zeros(0, np.float64), col_neg=np.zeros(0, np.int64),
    miss_ptr=np.zeros(1, np.int64), miss_rows=np.zeros(0, np.int32))


@dataclass
class DecisionTree:
    """Array-backed binary tree.

    Internal nodes route a row left when ``x[feature] <= threshold``; rows
    whose value is masked missing follow ``missing_left``. For classifiers
    ``value`` is the per-node class weight histogram (n_nodes, n_classes);
    for boosting trees it is the per-node score (n_nodes,).
    """

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray
    n_features: int
    classes: np.ndarray | None = None
    node_grad: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for nd in range(self.n_nodes):
            if self.left[nd] >= 0:
                depth[self.left[nd]] = depth[nd] + 1
                depth[self.right[nd]] = depth[nd] + 1
        reachable = self.reachable()
        return int(depth[reachable].max())

    def reachable(self) -> np.ndarray:
        seen = np.zeros(self.n_nodes, dtype=bool)
        stack = [0]
        while stack:
            nd = stack.pop()
            seen[nd] = True
            if self.left[nd] >= 0:
                stack.extend((self.left[nd], self.right[nd]))
        return seen

    def apply(self, X, missing_mask=None) -> np.ndarray:
        """Leaf index reached by every row."""
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"tree was fit on {self.n_features} features, got {X.shape[1]}")
        mask = as_mask(missing_mask, X.shape)
        return _kernels.apply_tree(X, mask, self.feature, self.threshold,
                                   self.missing_left, self.left, self.right)

    def predict_proba(self, X, missing_mask=None) -> np.ndarray:
        hist = self.value[self.apply(X, missing_mask)]
        total = hist.sum(axis=1, keepdims=True)
        return hist / np.where(total > 0, total, 1.0)

    def predict(self, X, missing_mask=None) -> np.ndarray:
        hist = self.value[self.apply(X, missing_mask)]
        return self.classes[np.argmax(hist, axis=1)]


def fit_tree(X, y, sample_weight=None, *, max_depth=None, min_samples_leaf=1,
             max_features=None, missing_mask=None, seed=0, classes=None,
             sample_count=None, presorted=None) -> DecisionTree:
    """Fit a Gini classification tree by exact greedy split search.

    Parameters
    ----------
    X : array of shape (n_samples, n_features)
    y : array of shape (n_samples,)
        Class labels.
    sample_weight : array of shape (n_samples,), optional
        Non-negative weights; rows with weight 0 are ignored.
    max_depth : int, optional
        ``None`` grows until leaves are pure or too small.
    max_features : int, optional
        Size of the random feature subset drawn at every node; ``None``
        considers all features.
    missing_mask : bool array like ``X``, optional
        Masked entries are ignored by split search and routed to the
        gain-maximizing side.
    classes : array, optional
        Label set fixing the histogram columns; defaults to ``unique(y)``.
    sample_count : array, optional
        Row multiplicities used for ``min_samples_leaf`` and reported leaf
        sizes (bootstrap counts); defaults to 1 for every weighted row.
    """
    X = as_matrix(X)
    y = np.asarray(y)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot fit a tree on zero samples")
    if len(y) != n:
        raise ValueError(f"X has {n} rows but y has {len(y)}")
    classes = np.unique(y) if classes is None else np.asarray(classes)
    yi = np.searchsorted(classes, y)
    if np.any(yi >= len(classes)) or np.any(classes[np.minimum(yi, len(classes) - 1)] != y):
        raise ValueError("y contains labels outside `classes`")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample weights must be finite and non-negative")
    if not w.sum() > 0:
        raise ValueError("total sample weight is zero")
    cnt = (w > 0).astype(np.float64) if sample_count is None else np.asarray(sample_count, np.float64)

    mask = as_mask(missing_mask, X.shape)
    stat = np.zeros((n, len(classes)))
    stat[np.arange(n), yi] = w
    mtry = d if max_features is None else int(min(max(max_features, 1), d))
    out = grow(X, mask, stat, cnt, mode=_kernels.GINI, max_depth=max_depth,
               min_samples_leaf=min_samples_leaf, mtry=mtry, seed=seed, presorted=presorted)
    feature, threshold, mleft, left, right, node_stat, node_cnt, gain, _, _ = out
    return DecisionTree(feature=feature, threshold=threshold, missing_left=mleft,
                        left=left, right=right, value=node_stat, n_samples=node_cnt,
                        gain=gain, n_features=d, classes=classes)


def grow(X, mask, stat, cnt, *, mode, max_depth=None, min_samples_leaf=1, mtry=None,
         seed=0, lam=0.0, alpha=0.0, presorted=None, XT=None):
    """Thin wrapper over the kernel that builds whichever column layout it needs.

    Callers fitting many trees on the same ``X`` pass ``presorted`` (all
    features per node) or ``XT`` (feature subsampling) to share the work.
    """
    d = X.shape[1]
    mtry = d if mtry is None else mtry
    if mtry < d:
        if XT is None:
            XT = X.T.copy()
        presorted = _EMPTY_PRESORT
    else:
        XT = _NO_XT
        if presorted is None:
            presorted = Presorted.build(X, mask)
    return _kernels.grow_tree(
        X, XT, mask, presorted.col_ptr, presorted.col_rows, presorted.col_vals,
        presorted.col_neg, presorted.miss_ptr, presorted.miss_rows,
        stat, cnt, mode, -1 if max_depth is None else int(max_depth),
        int(min_samples_leaf), int(mtry), int(seed) % (2**31), float(lam), float(alpha))
