"""Brute-force oracles for the corpus tasks.

Each oracle scans the dataset's records directly in plain Python, with no
aggregator or merge machinery, and returns the rows the task's outputs
should hold. Float statistics use two-pass formulas over ``math.fsum``.
"""
from __future__ import annotations

import math
import operator
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from boat.aggregators import Row

_OPS = {"<": operator.lt, ">": operator.gt, "<=": operator.le, ">=": operator.ge}
DAY = 86400


@dataclass
class Expected:
    rows: dict  # output name -> list[Row]
    approx: set = field(default_factory=set)  # outputs whose floats compare at 1e-9
    correlations: Optional[dict] = None  # key -> r (None when undefined)


def _grids(ds):
    for c in sorted(ds.counties, key=lambda c: c.code):
        for g in c.grids:
            yield c, g


def _records(ds, source: str, g, day: int) -> list:
    return ds.get_weather(g.id, day) if source == "weather" else ds.get_speed(g.id, day)


def _values(ds, source: str, fld: str, day: int) -> dict:
    """County name -> present values of one field, in traversal order."""
    out = defaultdict(list)
    for c, g in _grids(ds):
        for r in _records(ds, source, g, day):
            v = getattr(r, fld)
            if v is not None:
                out[c.name].append(v)
    return out


def mean(xs) -> float:
    return math.fsum(xs) / len(xs)


def pstdev(xs) -> float:
    m = mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


def pearson(xs, ys) -> Optional[float]:
    if len(xs) < 2 or min(xs) == max(xs) or min(ys) == max(ys):
        return None
    mx, my = mean(xs), mean(ys)
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = math.fsum((x - mx) ** 2 for x in xs)
    vy = math.fsum((y - my) ** 2 for y in ys)
    return cov / math.sqrt(vx * vy)


def _ranked(items, order: str, n: int, index=None) -> list[Row]:
    """items: (weight, value) pairs ordered like maximum/minimum outputs."""
    key = (lambda t: (-t[0], t[1])) if order == "max" else (lambda t: (t[0], t[1]))
    best = sorted(items, key=key)[:n]
    return [Row(index, r, v, w) for r, (w, v) in enumerate(best, start=1)]


def moments(ds, day, params, spec) -> Expected:
    vals = _values(ds, spec["source"], spec["field"], day)
    rows = {spec["mean"]: [], spec["stdev"]: []}
    q = spec.get("quantile")
    if q:
        rows[q] = []
    for name in sorted(vals):
        xs = vals[name]
        rows[spec["mean"]].append(Row(name, 0, mean(xs)))
        rows[spec["stdev"]].append(Row(name, 0, pstdev(xs)))
        if q:
            n, ordered = spec["quantiles"], sorted(xs)
            for k in range(1, n):
                pos = math.ceil(k * len(ordered) / n)
                rows[q].append(Row(name, k, ordered[max(pos, 1) - 1]))
    return Expected(rows, {spec["mean"], spec["stdev"]})


def extremes(ds, day, params, spec) -> Expected:
    vals = _values(ds, "weather", spec["field"], day)
    rows = {spec["max"]: [], spec["min"]: []}
    for name in sorted(vals):
        xs = vals[name]
        hi, lo = max(xs), min(xs)
        if spec["label"] == "county":
            rows[spec["max"]].append(Row(name, 1, name, hi))
            rows[spec["min"]].append(Row(name, 1, name, lo))
        else:
            rows[spec["max"]].append(Row(name, 1, hi))
            rows[spec["min"]].append(Row(name, 1, lo))
    return Expected(rows)


def county_mean_rank(ds, day, params, spec) -> Expected:
    vals = _values(ds, spec["source"], spec["field"], day)
    items = [(mean(xs), name) for name, xs in vals.items() if xs]
    rows = {spec["output"]: _ranked(items, spec["order"], spec["n"])}
    if spec.get("also"):
        other = "min" if spec["order"] == "max" else "max"
        rows[spec["also"]] = _ranked(items, other, spec["n"])
    return Expected(rows, set(rows))


def county_total_rank(ds, day, params, spec) -> Expected:
    totals = {}
    for c, g in _grids(ds):
        xs = [getattr(r, spec["field"]) for r in ds.get_weather(g.id, day)]
        totals.setdefault(c.name, []).extend(x for x in xs if x is not None)
    items = [(math.fsum(xs), name) for name, xs in totals.items()]
    return Expected({spec["output"]: _ranked(items, "max", spec["n"])}, {spec["output"]})


def grid_mean_rank(ds, day, params, spec) -> Expected:
    items = []
    for c, g in _grids(ds):
        xs = [getattr(r, spec["field"]) for r in ds.get_weather(g.id, day)]
        xs = [x for x in xs if x is not None]
        if xs:
            items.append((mean(xs), g.id))
    return Expected({spec["output"]: _ranked(items, "max", spec["n"])}, {spec["output"]})


def threshold_count(ds, day, params, spec) -> Expected:
    op, limit, fld = _OPS[spec["op"]], params[spec["param"]], spec["field"]
    per_county = defaultdict(Counter)
    for c, g in _grids(ds):
        for r in _records(ds, spec["source"], g, day):
            v = getattr(r, fld)
            if v is not None and op(v, limit):
                per_county[c.name][g.id] += 1
    rows = []
    for name in sorted(per_county):
        ranked = sorted(per_county[name].items(), key=lambda t: (-t[1], t[0]))[: spec["n"]]
        rows.extend(Row(name, r, gid, n) for r, (gid, n) in enumerate(ranked, start=1))
    return Expected({spec["output"]: rows})


def _correlation_rows(pairs: dict) -> Expected:
    rows = {k: [] for k in ("mx", "my", "mxy", "sx", "sy")}
    corr = {}
    for key in sorted(pairs):
        xs, ys = pairs[key]
        if not xs:
            continue
        rows["mx"].append(Row(key, 0, mean(xs)))
        rows["my"].append(Row(key, 0, mean(ys)))
        rows["mxy"].append(Row(key, 0, mean([x * y for x, y in zip(xs, ys)])))
        rows["sx"].append(Row(key, 0, pstdev(xs)))
        rows["sy"].append(Row(key, 0, pstdev(ys)))
        corr[key] = pearson(xs, ys)
    return Expected(rows, set(rows), corr)


def correlation(ds, day, params, spec) -> Expected:
    pairs = defaultdict(lambda: ([], []))
    for c, g in _grids(ds):
        for r in ds.get_weather(g.id, day):
            x, y = getattr(r, spec["x"]), getattr(r, spec["y"])
            if x is not None and y is not None:
                pairs[c.name][0].append(x)
                pairs[c.name][1].append(y)
    return _correlation_rows(pairs)


def joined_correlation(ds, day, params, spec) -> Expected:
    """Pair each speed reading with the weather reading of its slot."""
    interval = params.get("interval", 300)
    pairs = defaultdict(lambda: ([], []))
    for c, g in _grids(ds):
        speeds = ds.get_speed(g.id, day)
        if not speeds:
            continue
        by_time = {r.time: r for r in ds.get_weather(g.id, day)}
        for s in speeds:
            w = by_time.get(s.time - s.time % interval)
            if w is None:
                continue
            for fld in spec["fields"]:
                x = getattr(w, fld)
                if x is None:
                    continue
                key = c.name if spec["key"] == "county" else fld
                pairs[key][0].append(x)
                pairs[key][1].append(s.speed)
    return _correlation_rows(pairs)


def road_rank(ds, day, params, spec) -> Expected:
    by_road = defaultdict(list)
    segments = []
    for c, g in _grids(ds):
        speeds = ds.get_speed(g.id, day)
        for s in speeds:
            by_road[s.roadname].append(s.speed)
        if speeds:
            segments.append((mean([s.speed for s in speeds]), speeds[-1].roadname))
    rows = {spec["fastest"]: _ranked(segments, "max", spec["n"]),
            spec["average"]: [Row(road, 0, mean(by_road[road])) for road in sorted(by_road)]}
    return Expected(rows, set(rows))


def percent_above(ds, day, params, spec) -> Expected:
    flags = defaultdict(list)
    grids = defaultdict(list)
    for c, g in _grids(ds):
        speeds = ds.get_speed(g.id, day)
        marks = [100.0 if s.speed > s.reference else 0.0 for s in speeds]
        flags[c.name].extend(marks)
        if speeds:
            fast = sum(1 for m in marks if m)
            grids[c.name].append((100.0 * fast / len(speeds), g.id))
    rows = {spec["above"]: [Row(name, 0, mean(flags[name])) for name in sorted(flags) if flags[name]],
            spec["grids"]: [row for name in sorted(grids)
                            for row in _ranked(grids[name], "max", 1000, index=name)]}
    return Expected(rows, set(rows))


ORACLES = {
    "moments": moments, "extremes": extremes, "county_mean_rank": county_mean_rank,
    "county_total_rank": county_total_rank, "grid_mean_rank": grid_mean_rank,
    "threshold_count": threshold_count, "correlation": correlation,
    "joined_correlation": joined_correlation, "road_rank": road_rank,
    "percent_above": percent_above,
}


def expected(ds, day: int, params: dict, spec: dict) -> Expected:
    return ORACLES[spec["kind"]](ds, day, params, spec)
