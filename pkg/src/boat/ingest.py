"""CSV ingest into the binary dataset format, plus a seeded synthetic feed.

CSV layouts are documented in docs/ingest.md. Bad rows are rejected with a
reason and never abort the run unless they exceed ``max_reject_rate`` of
all data rows.
"""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from boat.domain import (SECONDS_PER_DAY, WEATHER_NUMERIC_FIELDS, County, Grid, SpeedRecord,
                         WeatherRecord, iso_to_timestamp, normalize_direction, parse_date,
                         speed_record_problems, timestamp_to_iso, weather_record_problems)
from boat.storage import CODEC_DEFLATE, open_dataset, write_dataset

METADATA_COLUMNS = ("grid_id", "latitude", "longitude", "county_code", "county_name")
WEATHER_COLUMNS = ("grid_id", "time", "tmpc", "wawa", "ptype", "dwpc", "smps", "drct", "vsby",
                   "roadtmpc", "srad", "snwd", "pcpn")
SPEED_COLUMNS = ("detector_code", "grid_id", "type", "speed", "reference", "time", "roadname")
FILES = {"metadata": "grids.csv", "weather": "weather.csv", "speed": "speed.csv"}


class IngestError(Exception):
    """Ingest cannot proceed (unreadable input, empty metadata, too many rejects)."""


@dataclass(frozen=True)
class RejectedRow:
    kind: str
    file: str
    line: int
    reason: str

    def __str__(self) -> str:
        return f"{self.file}:{self.line}: {self.kind} row rejected: {self.reason}"


@dataclass
class IngestReport:
    rows: dict = field(default_factory=lambda: {"metadata": 0, "weather": 0, "speed": 0})
    accepted: dict = field(default_factory=lambda: {"metadata": 0, "weather": 0, "speed": 0})
    rejected: list = field(default_factory=list)
    blocks: dict = field(default_factory=dict)
    raw_bytes: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    dataset_bytes: int = 0

    @property
    def reject_rate(self) -> float:
        total = self.rows["weather"] + self.rows["speed"]
        bad = sum(1 for r in self.rejected if r.kind in ("weather", "speed"))
        return bad / total if total else 0.0

    def summary(self) -> str:
        lines = []
        for kind in ("metadata", "weather", "speed"):
            line = f"{kind}: {self.rows[kind]} rows, {self.accepted[kind]} accepted"
            if kind in self.blocks:
                line += f", {self.blocks[kind]} blocks"
            if self.ratios.get(kind) is not None:
                line += f", ratio {self.ratios[kind]:.2f}x"
            lines.append(line)
        lines.append(f"rejected: {len(self.rejected)} rows")
        lines.extend("  " + str(r) for r in self.rejected[:20])
        if len(self.rejected) > 20:
            lines.append(f"  ... {len(self.rejected) - 20} more")
        return "\n".join(lines)


# -- parsing ------------------------------------------------------------

@lru_cache(maxsize=1 << 16)
def _timestamp(text: str) -> int:
    return iso_to_timestamp(text)


def _number(text: str, name: str, optional: bool) -> Optional[float]:
    text = text.strip()
    if not text:
        if optional:
            return None
        raise ValueError(f"{name} is required")
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"{name} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"{name} is not finite: {text!r}")
    return v


def _grid_id(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"grid_id is not an integer: {text!r}") from None


def _time(text: str) -> int:
    try:
        return _timestamp(text.strip())
    except ValueError as exc:
        raise ValueError(f"bad time {text!r}: {exc}") from None


def _rows(path: Path, columns: Sequence[str]) -> Iterator[tuple[int, dict]]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise IngestError(f"{path}: header lacks column(s) {', '.join(missing)}")
        pos = [header.index(c) for c in columns]
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                yield line, None
                continue
            yield line, {c: row[i] for c, i in zip(columns, pos)}


def parse_weather_row(row: dict) -> tuple[int, WeatherRecord]:
    values = {name: _number(row[name], name, True) for name in WEATHER_NUMERIC_FIELDS}
    values["drct"] = normalize_direction(values["drct"])
    rec = WeatherRecord(time=_time(row["time"]), wawa=row["wawa"].strip(),
                        ptype=row["ptype"].strip(), **values)
    problems = weather_record_problems(rec)
    if problems:
        raise ValueError("; ".join(problems))
    return _grid_id(row["grid_id"]), rec


def parse_speed_row(row: dict) -> tuple[int, SpeedRecord]:
    rec = SpeedRecord(time=_time(row["time"]), detectorcode=row["detector_code"].strip(),
                      vtype=row["type"].strip(), speed=_number(row["speed"], "speed", False),
                      reference=_number(row["reference"], "reference", False),
                      roadname=row["roadname"].strip())
    problems = speed_record_problems(rec)
    if problems:
        raise ValueError("; ".join(problems))
    return _grid_id(row["grid_id"]), rec


def read_metadata(path, report: IngestReport) -> list[County]:
    path = Path(path)
    order: list[str] = []
    names: dict[str, str] = {}
    grids: dict[str, list] = {}
    seen: set[int] = set()
    for line, row in _rows(path, METADATA_COLUMNS):
        report.rows["metadata"] += 1
        try:
            if row is None:
                raise ValueError("wrong number of fields")
            gid = _grid_id(row["grid_id"])
            lat = _number(row["latitude"], "latitude", False)
            lon = _number(row["longitude"], "longitude", False)
            code, name = row["county_code"].strip(), row["county_name"].strip()
            if not code or not name:
                raise ValueError("county_code and county_name are required")
            if gid in seen:
                raise ValueError(f"duplicate grid_id {gid}")
            if gid < 0:
                raise ValueError(f"grid_id {gid} is negative")
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise ValueError(f"coordinates ({lat}, {lon}) out of range")
            if code in names and names[code] != name:
                raise ValueError(f"county {code} named both {names[code]!r} and {name!r}")
        except ValueError as exc:
            report.rejected.append(RejectedRow("metadata", path.name, line, str(exc)))
            continue
        seen.add(gid)
        if code not in names:
            names[code] = name
            order.append(code)
            grids[code] = []
        grids[code].append(Grid(gid, lat, lon))
        report.accepted["metadata"] += 1
    if not order:
        raise IngestError(f"{path}: grid metadata is empty")
    return [County(code, names[code], tuple(grids[code])) for code in sorted(order)]


def read_records(kind: str, paths: Iterable, known: set, report: IngestReport) -> list:
    parse = parse_weather_row if kind == "weather" else parse_speed_row
    columns = WEATHER_COLUMNS if kind == "weather" else SPEED_COLUMNS
    out = []
    for p in paths:
        p = Path(p)
        for line, row in _rows(p, columns):
            report.rows[kind] += 1
            try:
                if row is None:
                    raise ValueError("wrong number of fields")
                gid, rec = parse(row)
                if gid not in known:
                    raise ValueError(f"unknown grid {gid} (not in metadata)")
            except ValueError as exc:
                report.rejected.append(RejectedRow(kind, p.name, line, str(exc)))
                continue
            out.append((gid, rec))
        report.raw_bytes[kind] = report.raw_bytes.get(kind, 0) + p.stat().st_size
    report.accepted[kind] = len(out)
    return out


def ingest(weather_paths: Iterable, speed_paths: Iterable, metadata_path, out_path, *,
           max_reject_rate: float = 0.05, codec: int = CODEC_DEFLATE) -> IngestReport:
    """Build a dataset at ``out_path`` from CSV feeds; returns the report."""
    report = IngestReport()
    counties = read_metadata(metadata_path, report)
    known = {g.id for c in counties for g in c.grids}
    weather = read_records("weather", weather_paths, known, report)
    speed = read_records("speed", speed_paths, known, report)
    if report.reject_rate > max_reject_rate:
        raise IngestError(f"reject rate {report.reject_rate:.4f} exceeds "
                          f"--max-reject-rate {max_reject_rate}")
    raw = {k: report.raw_bytes.get(k, 0) for k in ("weather", "speed")}
    write_dataset(out_path, counties, weather, speed, codec=codec, raw_bytes=raw)
    with open_dataset(out_path) as ds:
        stats = ds.stats()
        report.blocks = {k: len(ds.index[k]) for k in ("weather", "speed")}
    report.ratios = {k: s.ratio for k, s in stats.kinds.items()}
    report.dataset_bytes = stats.total_bytes
    return report


# -- synthetic feed -------------------------------------------------------

IOWA_COUNTIES = (
    "Adair", "Adams", "Allamakee", "Appanoose", "Audubon", "Benton", "Black Hawk", "Boone",
    "Bremer", "Buchanan", "Buena Vista", "Butler", "Calhoun", "Carroll", "Cass", "Cedar",
    "Cerro Gordo", "Cherokee", "Chickasaw", "Clarke", "Clay", "Clayton", "Clinton", "Crawford",
    "Dallas", "Davis", "Decatur", "Delaware", "Des Moines", "Dickinson", "Dubuque", "Emmet",
    "Fayette", "Floyd", "Franklin", "Fremont", "Greene", "Grundy", "Guthrie", "Hamilton",
    "Hancock", "Hardin", "Harrison", "Henry", "Howard", "Humboldt", "Ida", "Iowa", "Jackson",
    "Jasper", "Jefferson", "Johnson", "Jones", "Keokuk", "Kossuth", "Lee", "Linn", "Louisa",
    "Lucas", "Lyon", "Madison", "Mahaska", "Marion", "Marshall", "Mills", "Mitchell", "Monona",
    "Monroe", "Montgomery", "Muscatine", "O'Brien", "Osceola", "Page", "Palo Alto", "Plymouth",
    "Pocahontas", "Polk", "Pottawattamie", "Poweshiek", "Ringgold", "Sac", "Scott", "Shelby",
    "Sioux", "Story", "Tama", "Taylor", "Union", "Van Buren", "Wapello", "Warren", "Washington",
    "Wayne", "Webster", "Winnebago", "Winneshiek", "Woodbury", "Worth", "Wright",
)
# Codes are the 1-based alphabetical position, zero-padded (Polk = 077).
_PREFERRED = ("Polk", "Story")
ROADS = ("I-35", "I-80", "I-235", "I-380", "US-30", "US-65", "US-69", "IA-5", "IA-141", "IA-163")
_ROAD_REFERENCE = {"I": 65.0, "US": 55.0, "IA": 50.0}


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and value distributions of a generated feed.

    ``speed_grids_per_county`` limits detectors to the first grids of each
    county (``None`` means every grid), mirroring sparse sensor coverage.
    """

    seed: int = 0
    counties: int = 2
    grids_per_county: int = 2
    days: int = 1
    start_date: str = "5-11-2017"
    weather_interval: int = 300
    speed_interval: int = 20
    speed_grids_per_county: Optional[int] = None
    detectors_per_grid: int = 1
    base_temperature: float = 14.0
    temperature_spread: float = 3.0
    diurnal_amplitude: float = 5.0
    rain_probability: float = 0.35
    absent_rate: float = 0.004
    speed_noise: float = 4.0
    rain_slowdown: float = 8.0

    def __post_init__(self):
        for name in ("counties", "grids_per_county", "days", "detectors_per_grid"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.speed_grids_per_county is not None and self.speed_grids_per_county < 0:
            raise ValueError("speed_grids_per_county must be >= 0")
        for name in ("weather_interval", "speed_interval"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        parse_date(self.start_date)

    @property
    def first_day(self) -> int:
        return parse_date(self.start_date)


def _county_names(n: int) -> list[tuple[str, str]]:
    codes = {name: f"{i:03d}" for i, name in enumerate(IOWA_COUNTIES, start=1)}
    names = list(_PREFERRED) + [c for c in IOWA_COUNTIES if c not in _PREFERRED]
    out = [(codes[name], name) for name in names[:n]]
    for i in range(len(IOWA_COUNTIES) + 1, n + 1):
        out.append((f"{i:03d}", f"Synthetic {i}"))
    return out


def synthetic_counties(spec: SyntheticSpec) -> list[County]:
    counties = []
    for ci, (code, name) in enumerate(_county_names(spec.counties)):
        rng = random.Random(f"{spec.seed}/county/{code}")
        lat0, lon0 = rng.uniform(40.6, 43.3), rng.uniform(-96.3, -90.4)
        grids = tuple(Grid(ci * spec.grids_per_county + j + 1,
                           round(lat0 + 0.01 * (j // 8), 4), round(lon0 + 0.01 * (j % 8), 4))
                      for j in range(spec.grids_per_county))
        counties.append(County(code, name, grids))
    return sorted(counties, key=lambda c: c.code)


def _q(x: float) -> float:
    return round(x, 2) + 0.0  # + 0.0 folds -0.0 into 0.0


def _rain_window(spec: SyntheticSpec, gid: int, day: int) -> Optional[tuple[int, int]]:
    rng = random.Random(f"{spec.seed}/rain/{gid}/{day}")
    if rng.random() >= spec.rain_probability:
        return None
    start = rng.randrange(0, SECONDS_PER_DAY - 3600)
    return start, start + rng.randrange(1800, 6 * 3600)


def _weather_day(spec: SyntheticSpec, gid: int, day: int) -> Iterator[WeatherRecord]:
    g = random.Random(f"{spec.seed}/grid/{gid}")
    base = spec.base_temperature + g.uniform(-spec.temperature_spread, spec.temperature_spread)
    amp = spec.diurnal_amplitude * g.uniform(0.6, 1.4)
    spread_dew = g.uniform(2.0, 6.0)
    rng = random.Random(f"{spec.seed}/weather/{gid}/{day}")
    base += rng.uniform(-2.0, 2.0)
    snwd = _q(max(0.0, rng.gauss(2.0, 3.0))) if base < 0 else 0.0
    rain = _rain_window(spec, gid, day)
    wind = rng.uniform(1.0, 8.0)
    drct = rng.uniform(0.0, 360.0)
    t0 = day * SECONDS_PER_DAY
    absent = spec.absent_rate
    for k in range(SECONDS_PER_DAY // spec.weather_interval):
        sec = k * spec.weather_interval
        phase = 2 * math.pi * (sec - 15 * 3600) / SECONDS_PER_DAY
        tmpc = base + amp * math.cos(phase) + rng.gauss(0.0, 0.05)
        wet = rain is not None and rain[0] <= sec < rain[1]
        wind = min(25.0, max(0.0, wind + rng.gauss(0.0, 0.1)))
        drct = (drct + rng.gauss(0.0, 2.0)) % 360.0
        sun = math.sin(math.pi * (sec - 7 * 3600) / (10 * 3600)) if 7 * 3600 <= sec < 17 * 3600 else 0.0
        if wet:
            pcpn = _q(rng.uniform(0.05, 1.5))
            ptype = "SN" if tmpc < 0 else "RA"
            wawa = ptype
            vsby = _q(rng.uniform(2.0, 8.0))
            sun *= 0.3
        else:
            pcpn, ptype, wawa, vsby = 0.0, "", "", 16.09
        vals = {
            "tmpc": _q(tmpc), "dwpc": _q(tmpc - spread_dew + (2.0 if wet else 0.0)),
            "smps": _q(wind), "drct": float(round(drct) % 360), "vsby": vsby,
            "roadtmpc": _q(tmpc + 2.0 * sun - 0.5), "srad": _q(600.0 * sun), "snwd": snwd,
            "pcpn": pcpn,
        }
        if absent:
            for name in WEATHER_NUMERIC_FIELDS:
                if rng.random() < absent:
                    vals[name] = None
        yield WeatherRecord(time=t0 + sec, wawa=wawa, ptype=ptype, **vals)


def _detectors(spec: SyntheticSpec, gid: int) -> list[tuple[str, str, float]]:
    rng = random.Random(f"{spec.seed}/detectors/{gid}")
    out = []
    for d in range(spec.detectors_per_grid):
        road = ROADS[rng.randrange(len(ROADS))]
        ref = _ROAD_REFERENCE[road.split("-")[0]] + rng.choice((0.0, 5.0))
        out.append((f"D{gid:05d}{d:02d}", road, ref))
    return out


def _speed_day(spec: SyntheticSpec, gid: int, day: int) -> Iterator[SpeedRecord]:
    dets = _detectors(spec, gid)
    if not dets:
        return
    rng = random.Random(f"{spec.seed}/speed/{gid}/{day}")
    rain = _rain_window(spec, gid, day)
    t0 = day * SECONDS_PER_DAY
    levels = [ref for _, _, ref in dets]
    noise = spec.speed_noise
    for k in range(SECONDS_PER_DAY // spec.speed_interval):
        sec = k * spec.speed_interval
        hour = sec / 3600.0
        rush = 12.0 * (math.exp(-((hour - 8.0) ** 2) / 0.5) + math.exp(-((hour - 17.0) ** 2) / 0.8))
        wet = spec.rain_slowdown if rain is not None and rain[0] <= sec < rain[1] else 0.0
        for i, (code, road, ref) in enumerate(dets):
            levels[i] += 0.2 * (ref - rush - wet - levels[i]) + rng.gauss(0.0, 0.3)
            speed = max(0.0, float(round(levels[i] + rng.gauss(0.0, noise))))
            vtype = "truck" if rng.random() < 0.15 else "car"
            yield SpeedRecord(t0 + sec, code, vtype, speed, ref, road)


def _speed_grids(spec: SyntheticSpec, county: County) -> tuple[Grid, ...]:
    n = spec.speed_grids_per_county
    return county.grids if n is None else county.grids[:n]


def generate_records(spec: SyntheticSpec):
    """Return ``(counties, weather, speed)``; the latter two are lazy iterators
    of ``(grid_id, record)`` pairs in grid, day, time order."""
    counties = synthetic_counties(spec)
    days = range(spec.first_day, spec.first_day + spec.days)

    def weather():
        for c in counties:
            for g in c.grids:
                for d in days:
                    for rec in _weather_day(spec, g.id, d):
                        yield g.id, rec

    def speed():
        for c in counties:
            for g in _speed_grids(spec, c):
                for d in days:
                    for rec in _speed_day(spec, g.id, d):
                        yield g.id, rec

    return counties, weather(), speed()


def _fmt(v: Optional[float]) -> str:
    if v is None:
        return ""
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def generate_synthetic(spec: SyntheticSpec, out_path) -> dict:
    """Write grids.csv, weather.csv and speed.csv; returns their paths."""
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    counties, weather, speed = generate_records(spec)
    paths = {k: out / name for k, name in FILES.items()}
    with open(paths["metadata"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METADATA_COLUMNS)
        for c in counties:
            for g in c.grids:
                w.writerow((g.id, repr(g.latitude), repr(g.longitude), c.code, c.name))
    iso = lru_cache(maxsize=1 << 16)(timestamp_to_iso)
    with open(paths["weather"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEATHER_COLUMNS)
        for gid, r in weather:
            w.writerow((gid, iso(r.time), _fmt(r.tmpc), r.wawa, r.ptype, _fmt(r.dwpc),
                        _fmt(r.smps), _fmt(r.drct), _fmt(r.vsby), _fmt(r.roadtmpc),
                        _fmt(r.srad), _fmt(r.snwd), _fmt(r.pcpn)))
    with open(paths["speed"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPEED_COLUMNS)
        for gid, r in speed:
            w.writerow((r.detectorcode, gid, r.vtype, _fmt(r.speed), _fmt(r.reference),
                        iso(r.time), r.roadname))
    return paths


def build_synthetic(spec: SyntheticSpec, out_path, *, csv_dir=None, **ingest_args):
    """Generate CSVs (into ``csv_dir`` or ``out_path/raw``) and ingest them."""
    csv_dir = Path(csv_dir) if csv_dir is not None else Path(out_path) / "raw"
    paths = generate_synthetic(spec, csv_dir)
    return ingest([paths["weather"]], [paths["speed"]], paths["metadata"], out_path,
                  **ingest_args)


def write_synthetic_dataset(spec: SyntheticSpec, out_path) -> Path:
    """Skip CSV and write generated records straight into a dataset."""
    counties, weather, speed = generate_records(spec)
    return write_dataset(out_path, counties, weather, speed)
