"""Turn joined crash records into cleaned, encoded, split feature matrices."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import DataError, Diagnostics
from .ingest import DatasetView
from .records import N_CLASSES, CrashRecord, Severity

CATEGORICAL = "categorical"
NUMERIC = "numeric"
ONEHOT = "onehot"
TEXT = "text"

DEFAULT_PROPORTIONS = (0.70, 0.15, 0.15)
PARTS = ("train", "validation", "test")


@dataclass
class FeatureMatrix:
    """Dense feature matrix with names, labels and a missingness mask.

    Categorical columns hold integer codes into ``categories[name]`` (sorted
    lexicographically) until they are one-hot encoded. Where
    ``missing_mask`` is true the value is NaN before imputation and the
    imputed value after it. Synthetic rows (from oversampling) carry
    ``provenance`` rows ``(i, j, delta)`` indexing the original rows.
    """

    values: np.ndarray
    missing_mask: np.ndarray
    feature_names: list[str]
    labels: np.ndarray
    row_ids: np.ndarray
    kinds: list[str]
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)
    narratives: list[str] | None = None
    partition: str | None = None
    synthetic: np.ndarray | None = None
    provenance: np.ndarray | None = None

    def __post_init__(self):
        n, p = self.values.shape
        if self.missing_mask.shape != (n, p):
            raise ValueError("missing_mask shape does not match values")
        if len(self.feature_names) != p or len(self.kinds) != p:
            raise ValueError("feature_names/kinds length does not match column count")
        if len(self.labels) != n or len(self.row_ids) != n:
            raise ValueError("labels/row_ids length does not match row count")
        if self.narratives is not None and len(self.narratives) != n:
            raise ValueError("narratives length does not match row count")
        if self.synthetic is None:
            self.synthetic = np.zeros(n, dtype=bool)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=N_CLASSES)

    def take(self, rows: np.ndarray, partition: str | None = None) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        return replace(
            self, values=self.values[rows], missing_mask=self.missing_mask[rows],
            labels=self.labels[rows], row_ids=self.row_ids[rows],
            narratives=None if self.narratives is None else [self.narratives[i] for i in rows],
            partition=partition if partition is not None else self.partition,
            synthetic=self.synthetic[rows], provenance=None)

    def select_columns(self, names: Sequence[str]) -> "FeatureMatrix":
        index = {n: i for i, n in enumerate(self.feature_names)}
        try:
            cols = [index[n] for n in names]
        except KeyError as exc:
            raise DataError(f"unknown feature {exc.args[0]!r}") from None
        return replace(self, values=self.values[:, cols], missing_mask=self.missing_mask[:, cols],
                       feature_names=list(names), kinds=[self.kinds[c] for c in cols])


def records_to_matrix(records: Sequence[CrashRecord], categorical_fields=None,
                      numeric_fields=None) -> FeatureMatrix:
    """Collect structured fields into a matrix: categorical fields, then numeric, each sorted."""
    if categorical_fields is None:
        categorical_fields = sorted({k for r in records for k in r.categorical})
    if numeric_fields is None:
        numeric_fields = sorted({k for r in records for k in r.numeric})
    n = len(records)
    p = len(categorical_fields) + len(numeric_fields)
    values = np.full((n, p), np.nan)
    categories = {}
    for c, name in enumerate(categorical_fields):
        raw = [r.categorical.get(name) for r in records]
        cats = tuple(sorted({v for v in raw if v is not None}))
        code = {v: i for i, v in enumerate(cats)}
        categories[name] = cats
        values[:, c] = [np.nan if v is None else code[v] for v in raw]
    off = len(categorical_fields)
    for c, name in enumerate(numeric_fields):
        col = [r.numeric.get(name) for r in records]
        values[:, off + c] = [np.nan if v is None else float(v) for v in col]
    mask = np.isnan(values)
    return FeatureMatrix(
        values=values, missing_mask=mask,
        feature_names=[*categorical_fields, *numeric_fields],
        labels=np.array([int(r.severity) for r in records], dtype=np.int64),
        row_ids=np.array([r.record_id for r in records], dtype=object),
        kinds=[CATEGORICAL] * len(categorical_fields) + [NUMERIC] * len(numeric_fields),
        categories=categories,
        narratives=[r.narrative for r in records])


def lower_median(x: np.ndarray) -> float:
    s = np.sort(x)
    return float(s[(len(s) - 1) // 2])


def column_mode(codes: np.ndarray) -> float:
    """Most frequent code; ties go to the smallest code (categories are sorted)."""
    counts = np.bincount(codes.astype(np.int64))
    return float(np.argmax(counts))


def clean_features(m: FeatureMatrix, drop_threshold: float = 0.50) -> FeatureMatrix:
    """Drop mostly-missing columns and impute the rest.

    A column is dropped when its missing fraction is strictly above
    ``drop_threshold``. Categorical gaps take the column mode, numeric gaps
    the lower median. ``missing_mask`` keeps the pre-imputation pattern.
    """
    if not 0.0 < drop_threshold < 1.0:
        raise ValueError("drop_threshold must lie in (0, 1)")
    n = m.n_rows
    frac = m.missing_mask.mean(axis=0) if n else np.zeros(m.n_cols)
    keep = [c for c in range(m.n_cols) if not frac[c] > drop_threshold]
    values = m.values[:, keep].copy()
    mask = m.missing_mask[:, keep].copy()
    kinds = [m.kinds[c] for c in keep]
    for c in range(len(keep)):
        miss = mask[:, c]
        if not miss.any():
            continue
        present = values[~miss, c]
        fill = column_mode(present) if kinds[c] == CATEGORICAL else lower_median(present)
        values[miss, c] = fill
    names = [m.feature_names[c] for c in keep]
    return replace(m, values=values, missing_mask=mask, feature_names=names, kinds=kinds,
                   categories={k: v for k, v in m.categories.items() if k in names})


@dataclass
class Encoder:
    """One-hot layout learned from a fitted matrix: field order, then sorted categories."""

    fields: list[tuple[str, str, tuple[str, ...]]]  # (name, kind, categories)

    @classmethod
    def fit(cls, m: FeatureMatrix) -> "Encoder":
        fields = []
        for c, (name, kind) in enumerate(zip(m.feature_names, m.kinds)):
            if kind == CATEGORICAL:
                seen = np.unique(m.values[~np.isnan(m.values[:, c]), c]).astype(np.int64)
                cats = tuple(sorted(m.categories[name][i] for i in seen))
                fields.append((name, kind, cats))
            else:
                fields.append((name, kind, ()))
        return cls(fields)

    @property
    def feature_names(self) -> list[str]:
        out = []
        for name, kind, cats in self.fields:
            if kind == CATEGORICAL:
                out.extend(f"{name}={c}" for c in cats)
            else:
                out.append(name)
        return out

    def transform(self, m: FeatureMatrix, diagnostics: Diagnostics | None = None) -> FeatureMatrix:
        diagnostics = diagnostics if diagnostics is not None else Diagnostics()
        index = {name: c for c, name in enumerate(m.feature_names)}
        blocks, masks, kinds = [], [], []
        n = m.n_rows
        for name, kind, cats in self.fields:
            if name not in index:
                raise DataError(f"field {name!r} missing at encode time")
            col = m.values[:, index[name]]
            miss = m.missing_mask[:, index[name]]
            if kind != CATEGORICAL:
                blocks.append(col[:, None])
                masks.append(miss[:, None])
                kinds.append(kind)
                continue
            pos = {c: i for i, c in enumerate(cats)}
            local = m.categories[name]
            block = np.zeros((n, len(cats)))
            for r in range(n):
                if np.isnan(col[r]):
                    continue
                j = pos.get(local[int(col[r])])
                if j is None:
                    diagnostics.add("unseen_category", f"{name}={local[int(col[r])]}")
                else:
                    block[r, j] = 1.0
            blocks.append(block)
            masks.append(np.repeat(miss[:, None], len(cats), axis=1))
            kinds.extend([ONEHOT] * len(cats))
        values = np.hstack(blocks) if blocks else np.zeros((n, 0))
        mask = np.hstack(masks) if masks else np.zeros((n, 0), bool)
        return replace(m, values=values, missing_mask=mask, feature_names=self.feature_names,
                       kinds=kinds, categories={})


def encode_categoricals(m: FeatureMatrix, encoder: Encoder | None = None,
                        diagnostics: Diagnostics | None = None) -> FeatureMatrix:
    """One-hot encode categorical columns; numeric columns pass through."""
    encoder = encoder or Encoder.fit(m)
    return encoder.transform(m, diagnostics)


@dataclass
class SplitBundle:
    train: FeatureMatrix
    validation: FeatureMatrix
    test: FeatureMatrix
    proportions: tuple[float, float, float]
    seed: int

    def parts(self):
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def manifest(self) -> dict:
        return {"seed": self.seed, "proportions": list(self.proportions),
                "class_counts": {k: v.class_counts().tolist() for k, v in self.parts().items()},
                "feature_names": self.train.feature_names, "kinds": self.train.kinds}

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, part in self.parts().items():
            write_matrix_csv(part, directory / f"{name}.csv")
        (directory / "manifest.json").write_text(json.dumps(self.manifest(), indent=2))

    @classmethod
    def load(cls, directory) -> "SplitBundle":
        directory = Path(directory)
        man = json.loads((directory / "manifest.json").read_text())
        parts = {name: read_matrix_csv(directory / f"{name}.csv", man["kinds"], name)
                 for name in PARTS}
        return cls(**parts, proportions=tuple(man["proportions"]), seed=man["seed"])


def write_matrix_csv(m: FeatureMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row_id", "label", "missing", *m.feature_names])
        for r in range(m.n_rows):
            missing = ";".join(str(c) for c in np.flatnonzero(m.missing_mask[r]))
            w.writerow([m.row_ids[r], int(m.labels[r]), missing,
                        *(repr(float(v)) for v in m.values[r])])


def read_matrix_csv(path, kinds, partition=None) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = header[3:]
    values = np.array([[float(v) for v in row[3:]] for row in rows]).reshape(len(rows), len(names))
    mask = np.zeros(values.shape, bool)
    for r, row in enumerate(rows):
        if row[2]:
            mask[r, [int(c) for c in row[2].split(";")]] = True
    return FeatureMatrix(values=values, missing_mask=mask, feature_names=names,
                         labels=np.array([int(row[1]) for row in rows], dtype=np.int64),
                         row_ids=np.array([row[0] for row in rows], dtype=object),
                         kinds=list(kinds), partition=partition)


def apportion(n: int, proportions: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of ``n`` items; ties go to the earlier part."""
    exact = [n * p for p in proportions]
    alloc = [math.floor(e) for e in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in order[:n - sum(alloc)]:
        alloc[i] += 1
    return alloc


def stratified_split(m: FeatureMatrix, proportions=DEFAULT_PROPORTIONS, seed: int = 0,
                     min_per_class: int = 3) -> SplitBundle:
    """Per-class shuffled train/validation/test split.

    Each class is apportioned by largest remainder, so every part is within
    one row of its exact share. Rows keep their original relative order
    inside each part.
    """
    proportions = tuple(float(p) for p in proportions)
    if len(proportions) != 3 or abs(sum(proportions) - 1.0) > 1e-9 or min(proportions) < 0:
        raise ValueError(f"proportions must be three non-negative shares summing to 1, "
                         f"got {proportions}")
    rng = np.random.default_rng(seed)
    assign = np.empty(m.n_rows, dtype=np.int64)
    for cls in range(N_CLASSES):
        rows = np.flatnonzero(m.labels == cls)
        if len(rows) == 0:
            continue
        if len(rows) < min_per_class:
            raise DataError(f"class {Severity(cls).display} has {len(rows)} rows; "
                            f"at least {min_per_class} are needed to split")
        rows = rows[rng.permutation(len(rows))]
        start = 0
        for part, size in enumerate(apportion(len(rows), proportions)):
            assign[rows[start:start + size]] = part
            start += size
    parts = [m.take(np.flatnonzero(assign == k), PARTS[k]) for k in range(3)]
    return SplitBundle(*parts, proportions=proportions, seed=seed)


SKIP_INSUFFICIENT = "insufficient class records"


def screen_view(view: DatasetView, labels, min_per_class: int = 10) -> DatasetView:
    """Mark a view untrainable when any severity class has fewer than ``min_per_class`` rows.

    ``labels`` is a mapping record_id -> severity code, or a sequence
    aligned with ``view.record_ids``.
    """
    if isinstance(labels, dict):
        codes = [int(labels[r]) for r in view.record_ids]
    else:
        codes = [int(c) for c in labels]
        if len(codes) != len(view.record_ids):
            raise ValueError("labels are not aligned with the view records")
    counts = np.bincount(np.asarray(codes, dtype=np.int64), minlength=N_CLASSES)
    short = [f"{Severity(k).display}={counts[k]}" for k in range(N_CLASSES)
             if counts[k] < min_per_class]
    if short:
        return replace(view, trainable=False,
                       skip_reason=f"{SKIP_INSUFFICIENT}: {', '.join(short)} (< {min_per_class})")
    return replace(view, trainable=True, skip_reason=None)
