"""Text, CSV and JSON renderings of finalized output tables."""
from __future__ import annotations

import csv
import io
import json
import math

from boat.aggregators import OutputTable, Row

FORMATS = ("text", "csv", "json")


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isfinite(v) and v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    return str(v)


def _ordered(tables):
    for t in sorted(tables, key=lambda t: t.name):
        rows = sorted(t.rows, key=lambda r: ("" if r.index is None else r.index, r.rank))
        yield t, rows


def render_text(tables) -> str:
    lines = []
    for t, rows in _ordered(tables):
        for r in rows:
            head = t.name if r.index is None else f"{t.name}[{r.index}]"
            line = f"{head} = {format_value(r.value)}"
            if r.weight is not None:
                line += f" weight {format_value(r.weight)}"
            lines.append(line)
    return "".join(line + "\n" for line in lines)


def render_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = [(t.name, t.kind, "" if r.index is None else r.index, r.rank, format_value(r.value),
             "" if r.weight is None else format_value(r.weight))
            for t, rs in _ordered(tables) for r in rs]
    if rows:
        w.writerow(("output", "kind", "index", "rank", "value", "weight"))
        w.writerows(rows)
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return {"float": repr(v)}
    return v


def render_json(tables) -> str:
    doc = [{"name": t.name, "kind": t.kind,
            "rows": [{"index": r.index, "rank": r.rank, "value": _json_value(r.value),
                      "weight": _json_value(r.weight)} for r in rows]}
           for t, rows in _ordered(tables)]
    if not doc:
        return ""
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _unjson(v):
    if isinstance(v, dict):
        return float(v["float"])
    return v


def read_json(text: str) -> tuple[OutputTable, ...]:
    if not text.strip():
        return ()
    return tuple(OutputTable(t["name"], t["kind"],
                             tuple(Row(r["index"], r["rank"], _unjson(r["value"]),
                                       _unjson(r["weight"])) for r in t["rows"]))
                 for t in json.loads(text))


def render_output(tables, format: str = "text") -> bytes:
    if format == "text":
        out = render_text(tables)
    elif format == "csv":
        out = render_csv(tables)
    elif format == "json":
        out = render_json(tables)
    else:
        raise ValueError(f"unknown output format {format!r} (expected one of {', '.join(FORMATS)})")
    return out.encode("utf-8")
