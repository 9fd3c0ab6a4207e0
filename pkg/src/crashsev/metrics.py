"""Imbalance-aware classification metrics, view ranking, and ISS validation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ingest import view_definitions
from .records import N_CLASSES, SEVERITY_DISPLAY, RoadClass, Severity

AVERAGES = ("precision", "recall", "f1")


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise ValueError(f"y_true has {len(y_true)} labels, y_pred has {len(y_pred)}")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if len(y) and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"{name} contains labels outside 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def aggregate(per_class: Sequence[float], supports: Sequence[int]) -> tuple[float, float]:
    """(macro, support-weighted) averages over classes with nonzero support."""
    v = np.asarray(per_class, dtype=np.float64)
    s = np.asarray(supports, dtype=np.float64)
    present = s > 0
    if not present.any():
        raise ValueError("no class has positive support")
    return float(v[present].mean()), float((v * s).sum() / s.sum())


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros(len(num)), where=den > 0)


@dataclass
class EvalReport:
    """Per-class and averaged metrics for one evaluated configuration.

    ``weighted`` is the support-weighted average, shown in the column that
    crash-severity reports conventionally label "Micro Avg".
    """

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro: dict[str, float]
    weighted: dict[str, float]
    accuracy: float
    confusion: np.ndarray
    config_id: str | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def macro_f1(self) -> float:
        return self.macro["f1"]

    @property
    def n_rows(self) -> int:
        return int(self.support.sum())

    @classmethod
    def from_confusion(cls, cm: np.ndarray, config_id: str | None = None) -> "EvalReport":
        cm = np.asarray(cm, dtype=np.int64)
        total = cm.sum()
        if total == 0:
            raise ValueError("cannot evaluate zero rows")
        tp = np.diag(cm).astype(np.float64)
        pred_pos = cm.sum(axis=0).astype(np.float64)
        support = cm.sum(axis=1)
        precision = _ratio(tp, pred_pos)
        recall = _ratio(tp, support.astype(np.float64))
        f1 = _ratio(2 * precision * recall, precision + recall)
        diags = []
        for k in range(len(cm)):
            name = SEVERITY_DISPLAY[Severity(k)]
            if pred_pos[k] == 0:
                diags.append(f"no predictions for {name}: precision and F1 reported as 0")
            if support[k] == 0:
                diags.append(f"no true rows for {name}: excluded from macro averages")
        macro, weighted = {}, {}
        for name, vals in zip(AVERAGES, (precision, recall, f1)):
            macro[name], weighted[name] = aggregate(vals, support)
        return cls(precision=precision, recall=recall, f1=f1, support=support, macro=macro,
                   weighted=weighted, accuracy=float(np.trace(cm) / total), confusion=cm,
                   config_id=config_id, diagnostics=diags)

    def to_dict(self) -> dict:
        return {
            "config_id": self.config_id,
            "per_class": [
                {"label": int(k), "name": SEVERITY_DISPLAY[Severity(k)],
                 "precision": float(self.precision[k]), "recall": float(self.recall[k]),
                 "f1": float(self.f1[k]), "support": int(self.support[k])}
                for k in range(len(self.support))],
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        pc = data["per_class"]
        return cls(precision=np.array([c["precision"] for c in pc]),
                   recall=np.array([c["recall"] for c in pc]),
                   f1=np.array([c["f1"] for c in pc]),
                   support=np.array([c["support"] for c in pc], dtype=np.int64),
                   macro=dict(data["macro"]), weighted=dict(data["weighted"]),
                   accuracy=data["accuracy"],
                   confusion=np.array(data["confusion"], dtype=np.int64),
                   config_id=data.get("config_id"), diagnostics=list(data.get("diagnostics", [])))

    def row_block(self) -> list[list]:
        """Rows in report layout: per-class, Macro Avg, Micro Avg (weighted), Accuracy."""
        K = len(self.support)
        rows = []
        for k in range(K):
            rows.append([SEVERITY_DISPLAY[Severity(k)], self.precision[k], self.recall[k],
                         self.f1[k], int(self.support[k]), *self.confusion[k].tolist()])
        blank = [""] * K
        rows.append(["Macro Avg", self.macro["precision"], self.macro["recall"],
                     self.macro["f1"], self.n_rows, *blank])
        rows.append(["Micro Avg", self.weighted["precision"], self.weighted["recall"],
                     self.weighted["f1"], "", *blank])
        rows.append(["Accuracy", "", "", self.accuracy, self.n_rows, *blank])
        return rows


CSV_COLUMNS = ["config_id", "row", "precision", "recall", "f1", "support",
               *(f"cm_{k}" for k in range(N_CLASSES))]


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def reports_to_csv(reports: Iterable[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        for row in rep.row_block():
            w.writerow([rep.config_id or "", *(_cell(v) for v in row)])
    return buf.getvalue()


def reports_from_csv(text: str) -> list[EvalReport]:
    """Inverse of :func:`reports_to_csv`."""
    reader = csv.DictReader(io.StringIO(text))
    blocks: dict[str, list[dict]] = {}
    for row in reader:
        blocks.setdefault(row["config_id"], []).append(row)
    out = []
    names = [SEVERITY_DISPLAY[Severity(k)] for k in range(N_CLASSES)]
    for config_id, rows in blocks.items():
        by_name = {r["row"]: r for r in rows}
        pcs = [by_name[n] for n in names]
        macro, micro, acc = by_name["Macro Avg"], by_name["Micro Avg"], by_name["Accuracy"]
        cm = np.array([[int(r[f"cm_{k}"]) for k in range(N_CLASSES)] for r in pcs],
                      dtype=np.int64)
        out.append(EvalReport(
            precision=np.array([float(r["precision"]) for r in pcs]),
            recall=np.array([float(r["recall"]) for r in pcs]),
            f1=np.array([float(r["f1"]) for r in pcs]),
            support=np.array([int(r["support"]) for r in pcs], dtype=np.int64),
            macro={k: float(macro[k]) for k in AVERAGES},
            weighted={k: float(micro[k]) for k in AVERAGES},
            accuracy=float(acc["f1"]),
            confusion=cm,
            config_id=config_id or None,
            diagnostics=EvalReport.from_confusion(cm).diagnostics))
    return out


def evaluate(y_true, y_pred, config_id: str | None = None) -> EvalReport:
    """Per-class precision/recall/F1 plus macro, weighted and accuracy.

    Zero denominators yield 0 with a diagnostic. Macro averages cover the
    classes present in ``y_true``.
    """
    if len(y_true) == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    return EvalReport.from_confusion(confusion_matrix(y_true, y_pred), config_id)


# Ranking ---------------------------------------------------------------------

SCHEME_PRECEDENCE = {"Group3": 0, "Group2": 1, "Group1": 2}


@dataclass(frozen=True)
class Candidate:
    view_id: str
    scheme: str
    name: str
    macro_f1: float

    @property
    def label(self) -> str:
        if self.scheme == "Group1":
            return "Group 1"
        if self.scheme == "Group3":
            return "Group 3"
        return f"Group 2 & {self.name}"


@dataclass(frozen=True)
class RankedCandidate:
    rank: int
    candidate: Candidate


def candidate_view_ids(road_class: RoadClass) -> list[str]:
    """The Group1 view, the four Group2 views containing the class, and Group3."""
    return [vid for vid, _, _, members in view_definitions() if road_class in members]


def rank_views(candidates: dict) -> dict:
    """Rank each road class's candidate views by macro F1, descending.

    Ties go to the larger-data scheme (Group3, then Group2, then Group1)
    and then to input order.
    """
    out = {}
    for road_class, cands in candidates.items():
        indexed = list(enumerate(cands))
        indexed.sort(key=lambda ic: (-ic[1].macro_f1, SCHEME_PRECEDENCE[ic[1].scheme], ic[0]))
        out[road_class] = [RankedCandidate(r + 1, c) for r, (_, c) in enumerate(indexed)]
    return out


# ISS validation ----------------------------------------------------------------

ISS_BINS = ("Very Severe", "Severe", "Moderate", "Minor")
ISS_MIN, ISS_MAX = 1, 75


def iss_classify(iss: int) -> str:
    """Clinical ISS band: Very Severe >= 25, Severe 16-24, Moderate 9-15, Minor 1-8."""
    if isinstance(iss, bool) or int(iss) != iss or not ISS_MIN <= iss <= ISS_MAX:
        raise ValueError(f"ISS must be an integer in [{ISS_MIN}, {ISS_MAX}], got {iss!r}")
    if iss >= 25:
        return "Very Severe"
    if iss >= 16:
        return "Severe"
    if iss >= 9:
        return "Moderate"
    return "Minor"


@dataclass(frozen=True)
class IssRecord:
    predicted: Severity
    iss: int

    def __post_init__(self):
        iss_classify(self.iss)
        if not isinstance(self.predicted, Severity):
            object.__setattr__(self, "predicted", Severity(int(self.predicted)))


@dataclass
class IssValidation:
    crosstab: np.ndarray           # rows: predicted severity, columns: ISS_BINS
    counts: np.ndarray
    mean_iss: np.ndarray           # NaN where a severity has no records
    distribution: list[dict]       # per-severity quantile summary
    monotonic: bool

    def to_dict(self) -> dict:
        return {
            "bins": list(ISS_BINS),
            "crosstab": {SEVERITY_DISPLAY[Severity(k)]: self.crosstab[k].tolist()
                         for k in range(N_CLASSES)},
            "counts": self.counts.tolist(),
            "mean_iss": [None if np.isnan(m) else float(m) for m in self.mean_iss],
            "distribution": self.distribution,
            "monotonic_decreasing": self.monotonic,
        }


def iss_validate(records: Sequence[IssRecord]) -> IssValidation:
    """Cross-tabulate predicted severity against ISS bands and compare mean ISS.

    ``monotonic`` is true only when every severity has records and the mean
    ISS strictly decreases from Fatal to Possible injury.
    """
    if not records:
        raise ValueError("no ISS records to validate")
    cross = np.zeros((N_CLASSES, len(ISS_BINS)), dtype=np.int64)
    values: list[list[int]] = [[] for _ in range(N_CLASSES)]
    for rec in records:
        cross[int(rec.predicted), ISS_BINS.index(iss_classify(rec.iss))] += 1
        values[int(rec.predicted)].append(int(rec.iss))
    counts = cross.sum(axis=1)
    means = np.array([np.mean(v) if v else np.nan for v in values])
    dist = []
    for k, v in enumerate(values):
        entry = {"severity": SEVERITY_DISPLAY[Severity(k)], "n": len(v)}
        if v:
            q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
            entry.update(min=float(q[0]), q1=float(q[1]), median=float(q[2]), q3=float(q[3]),
                         max=float(q[4]), mean=float(np.mean(v)), std=float(np.std(v)))
        dist.append(entry)
    monotonic = bool(np.all(counts > 0) and np.all(np.diff(means) < 0))
    return IssValidation(cross, counts, means, dist, monotonic)
