"""Domain types for transportation sensor data plus calendar helpers.

The hierarchy is County -> Grid -> (weather | speed) records. Grids carry
optional lazy links to their record blocks; a link is absent iff the dataset
holds no records of that kind for the grid.

Timestamps are UTC seconds since the epoch and a day index is a whole number
of UTC days since 1970-01-01.
"""
from __future__ import annotations

import datetime as _dt
import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

SECONDS_PER_DAY = 86400
_EPOCH = _dt.date(1970, 1, 1)

WEATHER_NUMERIC_FIELDS = (
    "tmpc", "dwpc", "smps", "drct", "vsby", "roadtmpc", "srad", "snwd", "pcpn",
)
WEATHER_STRING_FIELDS = ("wawa", "ptype")
SPEED_NUMERIC_FIELDS = ("speed", "reference")
SPEED_STRING_FIELDS = ("detectorcode", "vtype", "roadname")


class DateParseError(ValueError):
    """Raised for malformed or impossible calendar dates."""

    def __init__(self, text: str, field_name: str, reason: str):
        self.text = text
        self.field = field_name
        super().__init__(f"cannot parse date {text!r}: {field_name} {reason}")


class WeatherRecord(NamedTuple):
    """One weather reading. Numeric fields may be None (absent)."""

    time: int
    tmpc: Optional[float] = None
    wawa: str = ""
    ptype: str = ""
    dwpc: Optional[float] = None
    smps: Optional[float] = None
    drct: Optional[float] = None
    vsby: Optional[float] = None
    roadtmpc: Optional[float] = None
    srad: Optional[float] = None
    snwd: Optional[float] = None
    pcpn: Optional[float] = None


class SpeedRecord(NamedTuple):
    time: int
    detectorcode: str
    vtype: str
    speed: float
    reference: float
    roadname: str


class Location(NamedTuple):
    latitude: float
    longitude: float


class WeatherRoot(NamedTuple):
    """Result of ``getweather``: the weather readings of one grid on one day."""

    weather: list


class SpeedRoot(NamedTuple):
    speeds: list


@dataclass(frozen=True)
class BlockLink:
    """Lazy reference from a grid to its stored blocks of one kind."""

    kind: str
    grid_id: int
    days: tuple[int, ...]


@dataclass(frozen=True)
class Grid:
    id: int
    latitude: float
    longitude: float
    weather_link: Optional[BlockLink] = None
    speed_link: Optional[BlockLink] = None

    @property
    def location(self) -> Location:
        return Location(self.latitude, self.longitude)


@dataclass(frozen=True)
class County:
    code: str
    name: str
    grids: tuple[Grid, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


_DATE_RE = re.compile(r"^(\d{1,2})-(\d{1,2})-(\d{4})$")


def parse_date(text: str) -> int:
    """Parse ``M-D-YYYY`` (or zero-padded ``MM-DD-YYYY``) to a day index."""
    m = _DATE_RE.match(text)
    if m is None:
        raise DateParseError(text, "text", "does not match M-D-YYYY")
    month, day, year = (int(g) for g in m.groups())
    if not 1 <= month <= 12:
        raise DateParseError(text, "month", f"{month} out of range 1..12")
    if year < 1:
        raise DateParseError(text, "year", f"{year} out of range")
    try:
        date = _dt.date(year, month, day)
    except ValueError:
        raise DateParseError(text, "day", f"{day} out of range for {year}-{month:02d}") from None
    return (date - _EPOCH).days


def format_date(day: int) -> str:
    """Inverse of :func:`parse_date` (no zero padding)."""
    d = _EPOCH + _dt.timedelta(days=day)
    return f"{d.month}-{d.day}-{d.year:04d}"


def day_of(timestamp: int) -> int:
    return timestamp // SECONDS_PER_DAY


def iso_to_timestamp(text: str) -> int:
    """Parse an ISO-8601 UTC timestamp with trailing 'Z' to epoch seconds."""
    if not text.endswith("Z"):
        raise ValueError(f"timestamp {text!r} must end with 'Z'")
    dt = _dt.datetime.fromisoformat(text[:-1])
    if dt.tzinfo is not None:
        raise ValueError(f"timestamp {text!r} carries an offset")
    return int(dt.replace(tzinfo=_dt.timezone.utc).timestamp())


def timestamp_to_iso(ts: int) -> str:
    dt = _dt.datetime.fromtimestamp(ts, tz=_dt.timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_direction(drct: Optional[float]) -> Optional[float]:
    """Map a wind direction into [0, 360); 360 becomes 0."""
    if drct is None:
        return None
    return drct % 360.0


def weather_record_problems(rec: WeatherRecord) -> list[str]:
    """Range problems of a single weather reading (empty when valid)."""
    problems = []
    for name in WEATHER_NUMERIC_FIELDS:
        v = getattr(rec, name)
        if v is not None and not math.isfinite(v):
            problems.append(f"{name} is not finite")
    for name in ("smps", "vsby", "srad", "snwd", "pcpn"):
        v = getattr(rec, name)
        if v is not None and v < 0:
            problems.append(f"{name} must be >= 0, got {v}")
    if rec.drct is not None and not 0 <= rec.drct <= 360:
        problems.append(f"drct must be in [0, 360], got {rec.drct}")
    return problems


def speed_record_problems(rec: SpeedRecord) -> list[str]:
    problems = []
    for name in SPEED_NUMERIC_FIELDS:
        v = getattr(rec, name)
        if not math.isfinite(v):
            problems.append(f"{name} is not finite")
        elif v < 0:
            problems.append(f"{name} must be >= 0, got {v}")
    return problems


def validate_dataset(counties: list[County]) -> list[Violation]:
    """Return every invariant violation in a county list; empty iff valid."""
    violations = []
    seen_codes: dict[str, int] = {}
    seen_grids: dict[int, str] = {}
    for ci, county in enumerate(counties):
        cpath = f"counties[{ci}]"
        if county.code in seen_codes:
            violations.append(Violation(
                f"{cpath}.countyCode",
                f"duplicate county code {county.code!r} (first at counties[{seen_codes[county.code]}])"))
        else:
            seen_codes[county.code] = ci
        if not county.name:
            violations.append(Violation(f"{cpath}.countyName", "county name is empty"))
        for gi, grid in enumerate(county.grids):
            gpath = f"{cpath}.grids[{gi}]"
            if grid.id < 0:
                violations.append(Violation(f"{gpath}.id", f"grid id {grid.id} is negative"))
            if grid.id in seen_grids:
                violations.append(Violation(
                    f"{gpath}.id", f"duplicate grid id {grid.id} (first at {seen_grids[grid.id]})"))
            else:
                seen_grids[grid.id] = gpath
            if not -90.0 <= grid.latitude <= 90.0:
                violations.append(Violation(f"{gpath}.latitude", f"latitude {grid.latitude} out of [-90, 90]"))
            if not -180.0 <= grid.longitude <= 180.0:
                violations.append(Violation(
                    f"{gpath}.longitude", f"longitude {grid.longitude} out of [-180, 180]"))
    return violations
