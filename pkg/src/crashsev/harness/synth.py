"""Synthetic crash, roadway and ISS data with controllable narrative signal."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..ingest import CrashSchema, SegmentSchema
from ..records import ROAD_CLASSES, CrashRecord, RoadClass, RoadSegment, Severity

# Person counts and row-wise severity shares (Fatal, Major, Minor, Possible) for
# a few crash attributes; class-conditional category weights derive from them.
ATTRIBUTE_TABLES = {
    "gender": {
        "Male": (16583, (4.45, 13.23, 39.73, 42.59)),
        "Female": (15713, (2.16, 7.85, 38.00, 52.00)),
    },
    "alcohol": {
        "Yes": (1609, (9.63, 22.68, 40.09, 27.59)),
        "No": (21196, (2.91, 10.10, 39.94, 47.05)),
    },
    "crash_type": {
        "Angle": (4762, (2.33, 6.22, 36.92, 54.54)),
        "Backing": (66, (1.52, 3.03, 39.39, 56.06)),
        "Head on": (2634, (8.12, 19.13, 35.73, 37.02)),
        "Left turn": (1020, (0.98, 8.14, 44.41, 46.47)),
        "Rear end": (7710, (1.14, 4.81, 35.67, 58.38)),
        "Rear to rear": (137, (0.73, 6.57, 38.69, 54.01)),
        "Sideswipe-O-Dir": (1064, (3.38, 8.74, 42.39, 45.49)),
        "Sideswipe-Dir": (1732, (0.92, 6.12, 40.01, 52.94)),
        "Single vehicle": (13214, (4.55, 14.86, 41.19, 39.40)),
    },
    "weather": {
        "Clear": (20662, (3.58, 11.67, 39.28, 45.47)),
        "Cloudy": (6192, (3.04, 9.9, 36.72, 50.34)),
        "Raining": (4525, (2.63, 7.18, 38.43, 51.76)),
        "Snowing": (360, (1.94, 5.28, 43.06, 49.72)),
        "Fog": (205, (5.37, 10.24, 43.9, 40.49)),
        "Sleet, hail": (178, (4.49, 8.99, 49.44, 37.08)),
    },
    "person_type": {
        "Driver": (22806, (3.39, 10.99, 39.95, 45.68)),
        "Passenger": (8664, (2.1, 8.75, 35.66, 53.49)),
        "Pedestrian": (668, (16.62, 20.21, 39.37, 23.8)),
        "Bicyclist": (159, (8.18, 13.21, 54.09, 24.53)),
    },
    "light_condition": {
        "Daylight": (21891, (2.63, 9.68, 37.73, 49.96)),
        "Dawn": (702, (2.99, 7.12, 40.46, 49.43)),
        "Dusk": (746, (5.63, 14.75, 41.96, 37.67)),
        "Dark-HWY lighted/on": (3006, (3.06, 9.25, 44.64, 43.05)),
        "Dark-HWY not lighted": (4948, (6.24, 14.96, 38.74, 40.06)),
    },
    "age_group": {
        "under 22": (7026, (2.01, 9.05, 38.86, 50.09)),
        "22-65": (21507, (3.49, 11.24, 39.36, 45.91)),
        "over 65": (3412, (5.33, 10.11, 38.04, 46.51)),
    },
    "secondary_crash": {
        "Yes": (705, (4.40, 11.91, 39.86, 43.83)),
        "No": (31635, (3.31, 10.57, 38.84, 47.28)),
    },
}

AGE_RANGES = {"under 22": (15, 21), "22-65": (22, 65), "over 65": (66, 92)}

DEFAULT_KEYWORDS = {
    "Fatal": ["deceased", "coroner", "pronounced", "fatality", "ejected", "cpr"],
    "Major": ["airlifted", "unconscious", "fracture", "bleeding", "trauma", "entrapped"],
    "Minor": ["abrasion", "bruising", "laceration", "scrape", "swelling", "limping"],
    "Possible": ["complained", "soreness", "refused", "stiffness", "headache", "shaken"],
}

DEFAULT_NOISE_VOCAB = (
    "unit vehicle driver traveling northbound southbound eastbound westbound lane road "
    "highway intersection stated struck rear front side left right turned turning stopped "
    "attempted merge signal light red green yellow traffic came contact came rest shoulder "
    "ditch guardrail pole median curve hill wet dry pavement roadway approaching slowed "
    "braked failed yield observed witness officer arrived scene damage bumper door fender "
    "hood tire towed moved parking lot ramp exit entered crossing speed too fast for "
    "conditions distracted phone deer animal debris construction zone cone barrel truck car "
    "suv pickup motorcycle trailer semi passenger seat belt airbag deployed occupant "
    "occupants ems responded checked at scene released continued drove away report was "
    "the a an and of to in on at from with by into onto while after before when then"
).split()

ROAD_CLASS_SHARES = {
    "R2L": 0.30, "U2L": 0.15, "UMU": 0.12, "UMD": 0.12,
    "UIP": 0.10, "RIP": 0.11, "RMD": 0.025, "RMU": 0.025,
}

# ISS band shares per true severity and the integer range drawn within each band
ISS_BAND_SHARES = {
    Severity.FATAL: (36, 17, 16, 8),
    Severity.MAJOR: (79, 126, 141, 73),
    Severity.MINOR: (28, 70, 144, 144),
    Severity.POSSIBLE: (16, 34, 88, 93),
}
ISS_BAND_RANGES = ((25, 41), (16, 24), (9, 15), (1, 8))

NON_FREEWAY_CLASSES = ("minor arterial", "major collector", "minor collector", "local")


@dataclass
class SynthParams:
    n_records: int = 5000
    priors: tuple[float, float, float, float] = (0.033, 0.106, 0.389, 0.472)
    keywords: dict[str, list[str]] = field(default_factory=lambda: {
        k: list(v) for k, v in DEFAULT_KEYWORDS.items()})
    noise_vocab: list[str] = field(default_factory=lambda: list(DEFAULT_NOISE_VOCAB))
    narrative_signal_strength: float = 0.8
    confuser_rate: float = 0.15
    narrative_length: tuple[int, int] = (18, 40)
    structured_signal: float = 1.0
    road_class_shares: dict[str, float] = field(default_factory=lambda: dict(ROAD_CLASS_SHARES))
    n_routes: int = 40
    segments_per_route: int = 25
    unmatched_fraction: float = 0.005
    speed_discrepancy_rate: float = 0.02
    include_iss: bool = True
    iss_availability: tuple[float, float, float, float] = (0.9, 0.6, 0.3, 0.2)

    def __post_init__(self):
        if abs(sum(self.priors) - 1.0) > 1e-6 or len(self.priors) != 4:
            raise ValueError("priors must be four shares summing to 1")
        if not 0.0 <= self.narrative_signal_strength <= 1.0:
            raise ValueError("narrative_signal_strength must lie in [0, 1]")
        if self.narrative_signal_strength > 0 and not all(
                self.keywords.get(name) for name in _KEYWORD_KEYS):
            raise ValueError("every class needs a non-empty keyword set when "
                             "narrative_signal_strength > 0")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthParams":
        data = dict(data)
        for key in ("priors", "narrative_length", "iss_availability"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


_KEYWORD_KEYS = ("Fatal", "Major", "Minor", "Possible")


@dataclass
class SyntheticData:
    crashes: list[CrashRecord]
    segments: list[RoadSegment]
    iss: dict[str, int]

    def write(self, directory) -> dict[str, Path]:
        """Write crash, segment and ISS CSVs plus the schema mapping used to read them."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {"crashes": directory / "crashes.csv", "segments": directory / "segments.csv",
                 "iss": directory / "iss.csv", "schema": directory / "schema.json"}
        crash_schema = CrashSchema(categorical=CATEGORICAL_FIELDS, numeric=NUMERIC_FIELDS)
        seg_schema = SegmentSchema()
        with open(paths["crashes"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["record_id", "route_id", "milepoint", "severity", "year", "narrative",
                        *CATEGORICAL_FIELDS, *NUMERIC_FIELDS])
            for r in self.crashes:
                w.writerow([r.record_id, r.route_id, repr(r.milepoint), r.severity.display,
                            r.year, r.narrative,
                            *("" if r.categorical.get(c) is None else r.categorical[c]
                              for c in CATEGORICAL_FIELDS),
                            *("" if r.numeric.get(c) is None else repr(r.numeric[c])
                              for c in NUMERIC_FIELDS)])
        with open(paths["segments"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["route_id", "bmp", "emp", "urban", "functional_class", "lanes",
                        "median_divided", "speed_limit", "aadt"])
            for s in self.segments:
                w.writerow([s.route_id, repr(s.bmp), repr(s.emp), int(s.urban),
                            s.functional_class, s.lanes, int(s.median_divided),
                            "" if s.speed_limit_his is None else repr(s.speed_limit_his),
                            "" if s.aadt is None else repr(s.aadt)])
        with open(paths["iss"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["record_id", "iss"])
            for rid, iss in self.iss.items():
                w.writerow([rid, iss])
        paths["schema"].write_text(json.dumps(
            {"crash": asdict(crash_schema), "segments": asdict(seg_schema)}, indent=2))
        return paths


CATEGORICAL_FIELDS = [*ATTRIBUTE_TABLES, "airbag", "county", "vehicle_make", "driver_condition"]
NUMERIC_FIELDS = ["age", "speed_limit", "vehicles_involved", "hour", "vehicle_year"]


def _conditional_weights(table: dict, priors: np.ndarray, strength: float):
    """Per-class category distributions tilted from the marginal by ``strength``."""
    cats = list(table)
    counts = np.array([table[c][0] for c in cats], dtype=np.float64)
    shares = np.array([table[c][1] for c in cats], dtype=np.float64)
    shares /= shares.sum(axis=1, keepdims=True)
    marginal = counts / counts.sum()
    joint = counts[:, None] * shares                      # category x class
    cond = joint / joint.sum(axis=0, keepdims=True)       # P(category | class)
    mixed = (1.0 - strength) * marginal[:, None] + strength * cond
    return cats, mixed / mixed.sum(axis=0, keepdims=True)


def _segment_attributes(rc: RoadClass, rng) -> dict:
    urban = rc.value[0] == "U"
    kind = rc.value[1:]
    if kind == "IP":
        fc = str(rng.choice(["interstate", "principal arterial"]))
        lanes = int(rng.choice([4, 4, 6]))
        divided = True
        speed = float(rng.choice([55, 65, 70]))
    elif kind == "2L":
        fc = str(rng.choice(NON_FREEWAY_CLASSES))
        lanes = 2
        divided = bool(rng.random() < 0.05)
        speed = float(rng.choice([25, 35, 45, 55]))
    else:
        fc = str(rng.choice(NON_FREEWAY_CLASSES[:3]))
        lanes = int(rng.choice([3, 4, 4, 5]))
        divided = kind == "MD"
        speed = float(rng.choice([35, 45, 55]))
    aadt = float(rng.integers(800, 6000) if kind == "2L" else rng.integers(5000, 60000))
    return dict(urban=urban, functional_class=fc, lanes=lanes, median_divided=divided,
                speed_limit_his=speed, aadt=aadt)


def _build_network(params: SynthParams, rng):
    classes = [RoadClass(c) for c in params.road_class_shares]
    segments = []
    by_class: dict[RoadClass, list[RoadSegment]] = {rc: [] for rc in ROAD_CLASSES}
    for r in range(params.n_routes):
        route = f"KY-{100 + r}"
        mp = 0.0
        for s in range(params.segments_per_route):
            # cycle classes so every class exists on some route
            rc = classes[(r * params.segments_per_route + s) % len(classes)]
            length = float(np.round(rng.uniform(0.2, 2.0), 3))
            seg = RoadSegment(route_id=route, bmp=round(mp, 3), emp=round(mp + length, 3),
                              **_segment_attributes(rc, rng))
            segments.append(seg)
            by_class[rc].append(seg)
            mp += length
    return segments, by_class


def _iss_value(sev: Severity, rng) -> int:
    shares = np.array(ISS_BAND_SHARES[sev], dtype=np.float64)
    band = rng.choice(4, p=shares / shares.sum())
    lo, hi = ISS_BAND_RANGES[band]
    return int(rng.integers(lo, hi + 1))


def _narrative(sev: Severity, params: SynthParams, rng) -> str:
    lo, hi = params.narrative_length
    words = [str(w) for w in rng.choice(params.noise_vocab, size=int(rng.integers(lo, hi + 1)))]
    # class keywords arrive as one contiguous phrase, like an injury description
    if rng.random() < params.narrative_signal_strength:
        kws = params.keywords[_KEYWORD_KEYS[int(sev)]]
        phrase = [str(w) for w in rng.choice(kws, size=min(len(kws), int(rng.integers(1, 4))),
                                             replace=False)]
        at = int(rng.integers(0, len(words) + 1))
        words[at:at] = phrase
    if params.keywords and rng.random() < params.confuser_rate:
        other = params.keywords.get(_KEYWORD_KEYS[int(rng.integers(4))])
        if other:
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(other)))
    text = " ".join(words)
    return text[0].upper() + text[1:] + "." if text else ""


def generate_synthetic(params: SynthParams | None = None, seed: int = 0) -> SyntheticData:
    """Draw a crash corpus whose severity is iid from ``params.priors``.

    Structured attributes follow class-conditional distributions (weak
    signal); narratives mix noise words with class keywords inserted with
    probability ``narrative_signal_strength``; locations fall on a
    generated route network populating all eight road classes.
    """
    params = params or SynthParams()
    rng = np.random.default_rng(seed)
    priors = np.asarray(params.priors, dtype=np.float64)
    segments, by_class = _build_network(params, rng)
    shares = np.array([params.road_class_shares.get(rc.value, 0.0) for rc in ROAD_CLASSES])
    shares = shares / shares.sum()
    tables = {name: _conditional_weights(tab, priors, params.structured_signal)
              for name, tab in ATTRIBUTE_TABLES.items()}
    counties = [f"County{i:02d}" for i in range(60)]
    makes = [f"Make{i:02d}" for i in range(30)]

    severities = rng.choice(4, size=params.n_records, p=priors / priors.sum())
    crashes = []
    iss = {}
    for n, code in enumerate(severities):
        sev = Severity(int(code))
        rid = f"P{n:06d}"
        if rng.random() < params.unmatched_fraction:
            seg = None
            route, mp = "KY-9999", float(np.round(rng.uniform(0, 10), 3))
        else:
            rc = ROAD_CLASSES[rng.choice(len(ROAD_CLASSES), p=shares)]
            seg = by_class[rc][int(rng.integers(len(by_class[rc])))]
            route = seg.route_id
            mp = float(np.round(rng.uniform(seg.bmp, seg.emp), 3))
            mp = min(mp, np.nextafter(seg.emp, 0)) if mp >= seg.emp else mp
        cat = {}
        for name, (cats, weights) in tables.items():
            cat[name] = cats[rng.choice(len(cats), p=weights[:, int(code)])]
        age_lo, age_hi = AGE_RANGES[cat.pop("age_group")]
        cat["airbag"] = str(rng.choice(["On", "Off", "Not Presented"], p=[0.55, 0.03, 0.42]))
        cat["county"] = counties[int(rng.integers(len(counties)))]
        cat["vehicle_make"] = makes[int(rng.integers(len(makes)))]
        cat["driver_condition"] = str(rng.choice(["Normal", "Fatigued", "Ill"]))
        num = {
            "age": float(rng.integers(age_lo, age_hi + 1)),
            "speed_limit": None,
            "vehicles_involved": float(1 if cat["crash_type"] == "Single vehicle"
                                       else rng.integers(2, 4)),
            "hour": float(rng.integers(0, 24)),
            "vehicle_year": float(rng.integers(1995, 2024)),
        }
        if seg is not None and rng.random() > 0.10:
            his = seg.speed_limit_his
            num["speed_limit"] = his + 10.0 if rng.random() < params.speed_discrepancy_rate else his
        # missingness: a few sparse gaps and one mostly-missing field
        if rng.random() < 0.04:
            num["age"] = None
        if rng.random() < 0.15:
            cat["airbag"] = None
        if rng.random() < 0.03:
            cat["weather"] = None
        if rng.random() < 0.65:
            cat["driver_condition"] = None
        crashes.append(CrashRecord(record_id=rid, route_id=route, milepoint=mp, severity=sev,
                                   categorical=cat, numeric=num,
                                   narrative=_narrative(sev, params, rng),
                                   year=int(rng.integers(2019, 2024))))
        if params.include_iss and rng.random() < params.iss_availability[int(code)]:
            iss[rid] = _iss_value(sev, rng)
    return SyntheticData(crashes, segments, iss)
