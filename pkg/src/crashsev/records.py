"""Core record types shared across the pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Severity(enum.IntEnum):
    """Person-level injury severity; lower code is more severe."""

    FATAL = 0
    MAJOR = 1
    MINOR = 2
    POSSIBLE = 3

    @property
    def display(self) -> str:
        return SEVERITY_DISPLAY[self]


SEVERITY_DISPLAY = {
    Severity.FATAL: "Fatal",
    Severity.MAJOR: "Major injury",
    Severity.MINOR: "Minor injury",
    Severity.POSSIBLE: "Possible injury",
}

N_CLASSES = len(Severity)

# Accepted spellings in crash files (matched case-insensitively).
SEVERITY_ALIASES = {
    "fatal": Severity.FATAL,
    "k": Severity.FATAL,
    "fatal injury": Severity.FATAL,
    "major": Severity.MAJOR,
    "major injury": Severity.MAJOR,
    "serious": Severity.MAJOR,
    "serious injury": Severity.MAJOR,
    "suspected serious injury": Severity.MAJOR,
    "a": Severity.MAJOR,
    "minor": Severity.MINOR,
    "minor injury": Severity.MINOR,
    "suspected minor injury": Severity.MINOR,
    "b": Severity.MINOR,
    "possible": Severity.POSSIBLE,
    "possible injury": Severity.POSSIBLE,
    "c": Severity.POSSIBLE,
}


def parse_severity(text: str) -> Severity:
    """Map a label or integer code to :class:`Severity`. Raises ``ValueError``."""
    key = text.strip().lower()
    if key in SEVERITY_ALIASES:
        return SEVERITY_ALIASES[key]
    if key.isdigit() and int(key) in (0, 1, 2, 3):
        return Severity(int(key))
    raise ValueError(f"unknown severity label {text!r}")


class RoadClass(str, enum.Enum):
    R2L = "R2L"
    RIP = "RIP"
    RMD = "RMD"
    RMU = "RMU"
    U2L = "U2L"
    UIP = "UIP"
    UMD = "UMD"
    UMU = "UMU"


ROAD_CLASSES = tuple(RoadClass)


@dataclass(frozen=True)
class RoadSegment:
    route_id: str
    bmp: float
    emp: float
    urban: bool
    functional_class: str
    lanes: int
    median_divided: bool
    speed_limit_his: float | None = None
    aadt: float | None = None
    numeric: dict[str, float | None] = field(default_factory=dict)
    categorical: dict[str, str | None] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bmp < self.emp:
            raise ValueError(f"segment {self.route_id}: bmp {self.bmp} must be < emp {self.emp}")
        if self.lanes < 1:
            raise ValueError(f"segment {self.route_id}: lanes must be >= 1, got {self.lanes}")

    def attributes(self) -> tuple[dict[str, str | None], dict[str, float | None]]:
        """Segment attributes as (categorical, numeric) maps for merging into a crash."""
        cat = {
            "urban_flag": "urban" if self.urban else "rural",
            "functional_class": self.functional_class,
            "median_divided": "divided" if self.median_divided else "undivided",
        }
        cat.update(self.categorical)
        num = {
            "lanes": float(self.lanes),
            "speed_limit_his": self.speed_limit_his,
            "aadt": self.aadt,
        }
        num.update(self.numeric)
        return cat, num


@dataclass(frozen=True)
class CrashRecord:
    """One person involved in one crash.

    ``segment`` and ``road_class`` are filled in by the linear join; an
    unjoined record carries ``None`` for both.
    """

    record_id: str
    route_id: str
    milepoint: float
    severity: Severity
    categorical: dict[str, str | None] = field(default_factory=dict)
    numeric: dict[str, float | None] = field(default_factory=dict)
    narrative: str = ""
    year: int | None = None
    segment: RoadSegment | None = None
    road_class: RoadClass | None = None

    def __post_init__(self):
        if self.milepoint < 0:
            raise ValueError(f"record {self.record_id}: negative milepoint {self.milepoint}")
        if not isinstance(self.severity, Severity):
            object.__setattr__(self, "severity", Severity(self.severity))
