"""SMOTE oversampling of the training partition."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import DataError
from .prep import FeatureMatrix
from .records import N_CLASSES, Severity


@dataclass(frozen=True)
class SmoteParams:
    """``target`` is ``"majority"`` or a mapping class code -> final count."""

    k_neighbors: int = 5
    target: str | dict = "majority"
    seed: int = 0
    delta_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        lo, hi = self.delta_range
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"delta_range must satisfy 0 <= lo < hi <= 1, got {self.delta_range}")


def target_counts(counts: np.ndarray, target) -> np.ndarray:
    if target == "majority":
        return np.where(counts > 0, counts.max(), 0)
    out = counts.copy()
    for cls, want in dict(target).items():
        if want < counts[int(cls)]:
            raise ValueError(f"target {want} for class {cls} is below its current count "
                             f"{counts[int(cls)]}; SMOTE never removes rows")
        out[int(cls)] = want
    return out


def nearest_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` Euclidean nearest other rows; distance ties go to the lower index."""
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    # stable sort on distance keeps index order among ties
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote_resample(train: FeatureMatrix, params: SmoteParams = SmoteParams()) -> FeatureMatrix:
    """Append synthetic minority rows ``x_i + delta * (x_j - x_i)``.

    ``x_j`` is one of the ``k`` same-class nearest neighbours of ``x_i``.
    Original rows come first and are unchanged; synthetic rows follow,
    grouped by class, with ``provenance`` rows ``(i, j, delta)`` (NaN for
    originals). Each class draws from its own stream seeded by
    ``(seed, class)``. A synthetic row is marked missing wherever either
    parent was.
    """
    if train.partition in ("validation", "test"):
        raise DataError(f"SMOTE must only touch the training partition, got {train.partition!r}")
    counts = train.class_counts()
    want = target_counts(counts, params.target)
    X = train.values
    lo, hi = params.delta_range
    new_x, new_mask, new_y, prov = [], [], [], []
    for cls in range(N_CLASSES):
        need = int(want[cls] - counts[cls])
        if need <= 0:
            continue
        rows = np.flatnonzero(train.labels == cls)
        if len(rows) <= params.k_neighbors:
            raise DataError(
                f"class {Severity(cls).display} has {len(rows)} training rows, not more than "
                f"k_neighbors={params.k_neighbors}; use a smaller k")
        rng = np.random.default_rng([params.seed, cls])
        nbrs = nearest_neighbors(X[rows], params.k_neighbors)
        base = rng.integers(0, len(rows), need)
        pick = rng.integers(0, params.k_neighbors, need)
        delta = lo + (hi - lo) * rng.random(need)
        i = rows[base]
        j = rows[nbrs[base, pick]]
        new_x.append(X[i] + delta[:, None] * (X[j] - X[i]))
        new_mask.append(train.missing_mask[i] | train.missing_mask[j])
        new_y.append(np.full(need, cls, dtype=np.int64))
        prov.append(np.column_stack((i, j, delta)))
    n = train.n_rows
    if not new_x:
        return replace(train, provenance=np.full((n, 3), np.nan))
    synth_x = np.vstack(new_x)
    m = len(synth_x)
    provenance = np.vstack([np.full((n, 3), np.nan), *prov])
    narratives = None if train.narratives is None else [*train.narratives, *([""] * m)]
    return replace(
        train,
        values=np.vstack([X, synth_x]),
        missing_mask=np.vstack([train.missing_mask, *new_mask]),
        labels=np.concatenate([train.labels, *new_y]),
        row_ids=np.concatenate([train.row_ids,
                                np.array([f"smote:{t}" for t in range(m)], dtype=object)]),
        narratives=narratives,
        synthetic=np.concatenate([train.synthetic, np.ones(m, dtype=bool)]),
        provenance=provenance)


def write_provenance_csv(m: FeatureMatrix, path) -> None:
    """Dump ``(row, i, j, delta)`` for every synthetic row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "i", "j", "delta"])
        for r in np.flatnonzero(m.synthetic):
            i, j, delta = m.provenance[r]
            w.writerow([r, int(i), int(j), repr(float(delta))])
