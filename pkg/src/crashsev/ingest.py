"""Crash and roadway-inventory parsing, linear-referencing join, road classes, views."""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .diagnostics import DataError, Diagnostics
from .records import (ROAD_CLASSES, CrashRecord, RoadClass, RoadSegment, Severity,
                      parse_severity)

# functional classes treated as interstate or principal arterial (lowercase)
DEFAULT_FREEWAY_CLASSES = ("interstate", "principal arterial", "freeway", "expressway")
TRUE_STRINGS = ("1", "true", "t", "yes", "y", "urban", "divided")


@dataclass
class CrashSchema:
    """Column mapping for a crash (person-level) file."""

    record_id: str = "record_id"
    route_id: str = "route_id"
    milepoint: str = "milepoint"
    severity: str = "severity"
    narrative: str | None = "narrative"
    year: str | None = "year"
    categorical: list[str] = field(default_factory=list)
    numeric: list[str] = field(default_factory=list)
    police_speed_field: str = "speed_limit"

    @classmethod
    def from_dict(cls, data: dict) -> "CrashSchema":
        return cls(**data)


@dataclass
class SegmentSchema:
    """Column mapping for a flattened roadway-inventory file."""

    route_id: str = "route_id"
    bmp: str = "bmp"
    emp: str = "emp"
    urban: str = "urban"
    functional_class: str = "functional_class"
    lanes: str = "lanes"
    median_divided: str = "median_divided"
    speed_limit: str | None = "speed_limit"
    aadt: str | None = "aadt"
    categorical: list[str] = field(default_factory=list)
    numeric: list[str] = field(default_factory=list)
    freeway_classes: list[str] = field(default_factory=lambda: list(DEFAULT_FREEWAY_CLASSES))

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentSchema":
        return cls(**data)


@dataclass
class ParseResult:
    records: list
    dropped: int
    diagnostics: Diagnostics


def _read_rows(path, required: list[str]):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing and header:
            raise DataError(f"{path}: missing mapped column(s) {missing}")
        if not header:
            return []
        return list(reader)


def _opt_float(text: str | None) -> float | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    return float(text)


def _opt_str(text: str | None) -> str | None:
    if text is None:
        return None
    text = text.strip()
    return text or None


def _flag(text: str) -> bool:
    return text.strip().lower() in TRUE_STRINGS


def parse_crash_csv(path, schema: CrashSchema | None = None) -> ParseResult:
    """Read person-level crash rows.

    Rows with a blank severity are dropped and counted. Rows with an
    unparseable milepoint, year or numeric field, or an unknown severity
    label, are skipped with a diagnostic naming the row number.
    """
    schema = schema or CrashSchema()
    required = [schema.record_id, schema.route_id, schema.milepoint, schema.severity,
                *schema.categorical, *schema.numeric]
    required += [c for c in (schema.narrative, schema.year) if c]
    rows = _read_rows(path, required)
    diag = Diagnostics()
    out = []
    dropped = 0
    for lineno, row in enumerate(rows, start=2):
        sev_text = (row[schema.severity] or "").strip()
        if not sev_text:
            dropped += 1
            diag.add("blank_severity")
            continue
        try:
            severity = parse_severity(sev_text)
            milepoint = float(row[schema.milepoint])
            if not milepoint >= 0:
                raise ValueError(f"milepoint {milepoint} is negative")
            year = None
            if schema.year and (row[schema.year] or "").strip():
                year = int(row[schema.year])
            numeric = {c: _opt_float(row[c]) for c in schema.numeric}
        except ValueError as exc:
            dropped += 1
            diag.add("bad_row", f"{path} row {lineno}: {exc}")
            continue
        out.append(CrashRecord(
            record_id=row[schema.record_id].strip(),
            route_id=row[schema.route_id].strip(),
            milepoint=milepoint,
            severity=severity,
            categorical={c: _opt_str(row[c]) for c in schema.categorical},
            numeric=numeric,
            narrative=(row[schema.narrative] or "") if schema.narrative else "",
            year=year,
        ))
    return ParseResult(out, dropped, diag)


def parse_segments_csv(path, schema: SegmentSchema | None = None) -> ParseResult:
    """Read roadway segments; rows with ``bmp >= emp`` or bad numbers are rejected."""
    schema = schema or SegmentSchema()
    required = [schema.route_id, schema.bmp, schema.emp, schema.urban, schema.functional_class,
                schema.lanes, schema.median_divided, *schema.categorical, *schema.numeric]
    required += [c for c in (schema.speed_limit, schema.aadt) if c]
    rows = _read_rows(path, required)
    diag = Diagnostics()
    out = []
    dropped = 0
    for lineno, row in enumerate(rows, start=2):
        try:
            seg = RoadSegment(
                route_id=row[schema.route_id].strip(),
                bmp=float(row[schema.bmp]),
                emp=float(row[schema.emp]),
                urban=_flag(row[schema.urban]),
                functional_class=row[schema.functional_class].strip(),
                lanes=int(float(row[schema.lanes])),
                median_divided=_flag(row[schema.median_divided]),
                speed_limit_his=_opt_float(row[schema.speed_limit]) if schema.speed_limit else None,
                aadt=_opt_float(row[schema.aadt]) if schema.aadt else None,
                numeric={c: _opt_float(row[c]) for c in schema.numeric},
                categorical={c: _opt_str(row[c]) for c in schema.categorical},
            )
        except ValueError as exc:
            dropped += 1
            diag.add("rejected_segment", f"{path} row {lineno}: {exc}")
            continue
        out.append(seg)
    return ParseResult(out, dropped, diag)


def classify_road(urban: bool, functional_class: str, lanes: int, median_divided: bool,
                  freeway_classes=DEFAULT_FREEWAY_CLASSES) -> RoadClass:
    """Map segment geometry to one of the eight road classes."""
    prefix = "U" if urban else "R"
    if functional_class.strip().lower() in {c.lower() for c in freeway_classes}:
        return RoadClass(prefix + "IP")
    if lanes <= 2:
        return RoadClass(prefix + "2L")
    return RoadClass(prefix + ("MD" if median_divided else "MU"))


class SegmentIndex:
    """Per-route sorted, non-overlapping segments for half-open milepoint lookup.

    Overlaps are resolved in favour of the segment with the smaller ``bmp``:
    a later segment is trimmed to start where the earlier one ends, and
    dropped if nothing remains.
    """

    def __init__(self, segments: list[RoadSegment], diagnostics: Diagnostics | None = None):
        self.diagnostics = diagnostics if diagnostics is not None else Diagnostics()
        by_route: dict[str, list[RoadSegment]] = {}
        for seg in segments:
            by_route.setdefault(seg.route_id, []).append(seg)
        self._segments: dict[str, list[RoadSegment]] = {}
        self._starts: dict[str, list[float]] = {}
        for route, segs in by_route.items():
            segs.sort(key=lambda s: (s.bmp, s.emp))
            kept: list[RoadSegment] = []
            for seg in segs:
                if kept and seg.bmp < kept[-1].emp:
                    prev = kept[-1]
                    self.diagnostics.add(
                        "segment_overlap",
                        f"route {route}: [{seg.bmp}, {seg.emp}) overlaps [{prev.bmp}, {prev.emp})")
                    if seg.emp <= prev.emp:
                        continue
                    seg = replace(seg, bmp=prev.emp)
                kept.append(seg)
            self._segments[route] = kept
            self._starts[route] = [s.bmp for s in kept]

    def lookup(self, route_id: str, milepoint: float) -> RoadSegment | None:
        starts = self._starts.get(route_id)
        if not starts:
            return None
        i = bisect.bisect_right(starts, milepoint) - 1
        if i < 0:
            return None
        seg = self._segments[route_id][i]
        return seg if seg.bmp <= milepoint < seg.emp else None

    def segments(self, route_id: str) -> list[RoadSegment]:
        return list(self._segments.get(route_id, []))


@dataclass
class JoinResult:
    records: list[CrashRecord]
    unmatched: int
    speed_discrepancies: int
    diagnostics: Diagnostics

    def summary(self) -> dict:
        return {"joined": len(self.records), "unmatched": self.unmatched,
                "speed_discrepancies": self.speed_discrepancies,
                "diagnostics": self.diagnostics.to_dict()}


def linear_join(crashes: list[CrashRecord], segments: list[RoadSegment] | SegmentIndex,
                police_speed_field: str = "speed_limit",
                freeway_classes=DEFAULT_FREEWAY_CLASSES) -> JoinResult:
    """Attach each crash to the segment with ``bmp <= milepoint < emp`` on its route.

    Matched records gain the segment attributes and a road class. The police
    speed limit is kept over the inventory one; any other attribute present
    in both sources keeps the crash value. Unmatched crashes are excluded
    and counted.
    """
    diag = Diagnostics()
    index = segments if isinstance(segments, SegmentIndex) else SegmentIndex(segments, diag)
    if index.diagnostics is not diag:
        diag.merge(index.diagnostics)
    out = []
    unmatched = 0
    discrepancies = 0
    for rec in crashes:
        seg = index.lookup(rec.route_id, rec.milepoint)
        if seg is None:
            unmatched += 1
            diag.add("unmatched", f"record {rec.record_id}: no segment on {rec.route_id} "
                                  f"covers milepoint {rec.milepoint}")
            continue
        seg_cat, seg_num = seg.attributes()
        his_speed = seg_num.pop("speed_limit_his")
        categorical = dict(seg_cat)
        for key, value in rec.categorical.items():
            if key in seg_cat and seg_cat[key] is not None and value is not None \
                    and seg_cat[key] != value:
                diag.add("attribute_conflict", f"record {rec.record_id}: {key} kept from crash")
            if value is not None or key not in categorical:
                categorical[key] = value
        numeric = dict(seg_num)
        for key, value in rec.numeric.items():
            if key == police_speed_field:
                continue
            if key in seg_num and seg_num[key] is not None and value is not None \
                    and seg_num[key] != value:
                diag.add("attribute_conflict", f"record {rec.record_id}: {key} kept from crash")
            if value is not None or key not in numeric:
                numeric[key] = value
        police = rec.numeric.get(police_speed_field)
        if police is not None and his_speed is not None and police != his_speed:
            discrepancies += 1
        numeric[police_speed_field] = police if police is not None else his_speed
        road_class = classify_road(seg.urban, seg.functional_class, seg.lanes,
                                   seg.median_divided, freeway_classes)
        out.append(replace(rec, categorical=categorical, numeric=numeric, segment=seg,
                           road_class=road_class))
    diag.add("speed_discrepancy", n=discrepancies)
    return JoinResult(out, unmatched, discrepancies, diag)


@dataclass(frozen=True)
class DatasetView:
    view_id: str
    scheme: str
    name: str
    members: frozenset
    record_ids: tuple
    trainable: bool = True
    skip_reason: str | None = None

    def __len__(self) -> int:
        return len(self.record_ids)

    def to_dict(self) -> dict:
        return {"view_id": self.view_id, "scheme": self.scheme, "name": self.name,
                "members": sorted(m.value for m in self.members),
                "n_records": len(self.record_ids), "trainable": self.trainable,
                "skip_reason": self.skip_reason}


_RC = RoadClass
# (name, members) for each complementary pair; the complement follows its partner
GROUP2_PAIRS = (
    (("Urban", {_RC.U2L, _RC.UMD, _RC.UMU, _RC.UIP}), "Rural"),
    (("Freeway", {_RC.UIP, _RC.RIP}), "Non-Freeway"),
    (("Two-Lane", {_RC.R2L, _RC.U2L}), "Multi-Lane"),
    (("Divided", {_RC.UMD, _RC.RMD, _RC.UIP, _RC.RIP}), "Undivided"),
)


def view_definitions() -> list[tuple[str, str, str, frozenset]]:
    """(view_id, scheme, name, members) for all 17 views, in canonical order."""
    defs = [(f"G1-{rc.value}", "Group1", rc.value, frozenset({rc})) for rc in ROAD_CLASSES]
    for (name, members), other in GROUP2_PAIRS:
        members = frozenset(members)
        defs.append((f"G2-{name}", "Group2", name, members))
        defs.append((f"G2-{other}", "Group2", other, frozenset(ROAD_CLASSES) - members))
    defs.append(("G3-All", "Group3", "All", frozenset(ROAD_CLASSES)))
    return defs


def build_dataset_views(records: list[CrashRecord]) -> list[DatasetView]:
    """Materialize the 17 road-class views; record order follows the input."""
    for rec in records:
        if rec.road_class is None:
            raise DataError(f"record {rec.record_id} has no road class")
    views = []
    for view_id, scheme, name, members in view_definitions():
        ids = tuple(r.record_id for r in records if r.road_class in members)
        views.append(DatasetView(view_id, scheme, name, members, ids))
    return views


# joined-dataset CSV: fixed columns then "cat:<field>" and "num:<field>" columns
_FIXED = ("record_id", "route_id", "milepoint", "severity", "year", "road_class", "narrative")


def write_joined_csv(records: list[CrashRecord], path) -> None:
    cat_fields = sorted({k for r in records for k in r.categorical})
    num_fields = sorted({k for r in records for k in r.numeric})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*_FIXED, *(f"cat:{c}" for c in cat_fields), *(f"num:{c}" for c in num_fields)])
        for r in records:
            nums = [r.numeric.get(c) for c in num_fields]
            w.writerow([r.record_id, r.route_id, repr(r.milepoint), int(r.severity),
                        "" if r.year is None else r.year,
                        "" if r.road_class is None else r.road_class.value, r.narrative,
                        *("" if r.categorical.get(c) is None else r.categorical[c]
                          for c in cat_fields),
                        *("" if v is None else repr(float(v)) for v in nums)])


def read_joined_csv(path) -> list[CrashRecord]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in _FIXED if c not in header]
        if missing:
            raise DataError(f"{path}: not a joined dataset, missing {missing}")
        cat_fields = [c[4:] for c in header if c.startswith("cat:")]
        num_fields = [c[4:] for c in header if c.startswith("num:")]
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(CrashRecord(
                    record_id=row["record_id"], route_id=row["route_id"],
                    milepoint=float(row["milepoint"]), severity=Severity(int(row["severity"])),
                    categorical={c: _opt_str(row[f"cat:{c}"]) for c in cat_fields},
                    numeric={c: _opt_float(row[f"num:{c}"]) for c in num_fields},
                    narrative=row["narrative"] or "",
                    year=int(row["year"]) if row["year"] else None,
                    road_class=RoadClass(row["road_class"]) if row["road_class"] else None,
                ))
            except ValueError as exc:
                raise DataError(f"{path} row {lineno}: {exc}") from exc
    return out


def write_join_diagnostics(result: JoinResult, path, **extra) -> None:
    Path(path).write_text(json.dumps({**result.summary(), **extra}, indent=2, sort_keys=True))
