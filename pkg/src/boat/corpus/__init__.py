"""The evaluation task corpus and its harness.

Programs declare their tunables (the query date, thresholds) as top-level
literal variables; :func:`apply_params` rewrites those literals so a run can
override them without editing program text.
"""
from __future__ import annotations

import copy
import fnmatch
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from boat.aggregators import OutputTable
from boat.corpus import oracles
from boat.domain import parse_date
from boat.engine import plan, render_output, run
from boat.lang import ast, parse, typecheck

CORPUS_DIR = Path(__file__).parent
MANIFEST = CORPUS_DIR / "corpus.toml"
CATEGORIES = ("Temperature Statistics", "Wind Behavior", "Precipitation", "Speed",
              "Weather-on-Speed", "Speeding Violations")
CLASSIFICATIONS = ("Central Tendency", "Rank", "Correlation", "Anomaly")
REL_TOL = 1e-9
R_TOL = 1e-9


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    category: str
    classification: str
    program: Path
    description: str
    oracle: dict

    @property
    def source(self) -> str:
        return self.program.read_text(encoding="utf-8")


def load_corpus(manifest: Path = MANIFEST) -> list[CorpusEntry]:
    with open(manifest, "rb") as fh:
        doc = tomllib.load(fh)
    entries, seen = [], set()
    for t in doc.get("task", []):
        if t["id"] in seen:
            raise ValueError(f"duplicate corpus id {t['id']}")
        if t["category"] not in CATEGORIES or t["classification"] not in CLASSIFICATIONS:
            raise ValueError(f"{t['id']}: unknown category or classification")
        seen.add(t["id"])
        entries.append(CorpusEntry(t["id"], t["category"], t["classification"],
                                   manifest.parent / t["program"], t["description"],
                                   dict(t.get("oracle", {}))))
    return entries


def select_entries(entries: list[CorpusEntry], select=None) -> list[CorpusEntry]:
    """``select``: None (all), a predicate, or ids / glob patterns like ``"A.*"``."""
    if select is None:
        return list(entries)
    if callable(select):
        return [e for e in entries if select(e)]
    if isinstance(select, str):
        select = [select]
    pats = list(select)
    return [e for e in entries if any(fnmatch.fnmatchcase(e.id, p) for p in pats)]


# -- parameters -----------------------------------------------------------

def program_params(program: ast.Program) -> dict:
    """Top-level ``name := literal;`` declarations."""
    return {s.name: s.value.value for s in program.statements
            if isinstance(s, ast.VarDecl) and isinstance(s.value, ast.Literal)}


def apply_params(program: ast.Program, params: dict) -> ast.Program:
    """Copy of ``program`` with matching top-level literals replaced.

    Names the program does not declare are ignored; an int given for a float
    literal is widened, any other type change is an error.
    """
    prog = copy.deepcopy(program)
    for s in prog.statements:
        if not (isinstance(s, ast.VarDecl) and isinstance(s.value, ast.Literal)):
            continue
        if s.name not in params:
            continue
        new, lit = params[s.name], s.value
        if lit.kind == "float" and isinstance(new, int) and not isinstance(new, bool):
            new = float(new)
        want = {"int": int, "float": float, "string": str, "bool": bool}[lit.kind]
        if type(new) is not want:
            raise TypeError(f"parameter {s.name!r} must be {lit.kind}, got {type(new).__name__}")
        s.value = ast.Literal(new, lit.kind, line=lit.line, col=lit.col)
    return prog


def parse_param(text: str):
    """``name=value`` from the command line; value typed as int, float or string."""
    name, sep, raw = text.partition("=")
    if not sep or not name:
        raise ValueError(f"parameter {text!r} must look like name=value")
    for conv in (int, float):
        try:
            return name, conv(raw)
        except ValueError:
            pass
    return name, raw


# -- comparison -----------------------------------------------------------

def correlations(tables) -> dict:
    """r = (E[xy] - E[x]E[y]) / (sx sy) per key of the mx/my/mxy/sx/sy outputs."""
    byname = {t.name: {r.index: r.value for r in t.rows} for t in tables}
    out = {}
    for key in byname.get("mxy", {}):
        sx, sy = byname["sx"][key], byname["sy"][key]
        if sx == 0 or sy == 0:
            out[key] = None
            continue
        r = (byname["mxy"][key] - byname["mx"][key] * byname["my"][key]) / (sx * sy)
        if abs(r) > 1 + 1e-12:
            raise AssertionError(f"correlation for {key!r} is {r}, outside [-1, 1]")
        out[key] = r
    return out


def _close(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=1e-12)
    return a == b


def compare(tables, exp: oracles.Expected) -> list[str]:
    """Differences between engine tables and oracle rows (empty when matching)."""
    problems = []
    got = {t.name: t for t in tables}
    for name, rows in exp.rows.items():
        if name not in got:
            problems.append(f"missing output {name}")
            continue
        actual = sorted(got[name].rows, key=lambda r: ("" if r.index is None else r.index, r.rank))
        want = sorted(rows, key=lambda r: ("" if r.index is None else r.index, r.rank))
        if len(actual) != len(want):
            problems.append(f"{name}: {len(actual)} rows, oracle has {len(want)}")
            continue
        approx = name in exp.approx
        same = _close if approx else (lambda a, b: a == b)
        for a, w in zip(actual, want):
            if (a.index, a.rank) != (w.index, w.rank) or not same(a.value, w.value) \
                    or (a.weight is None) != (w.weight is None) \
                    or (a.weight is not None and not same(a.weight, w.weight)):
                problems.append(f"{name}: got {a}, oracle {w}")
                break
    if exp.correlations is not None:
        r = correlations(tables)
        for key, want in exp.correlations.items():
            mine = r.get(key)
            if (mine is None) != (want is None) or (want is not None and abs(mine - want) > R_TOL):
                problems.append(f"r[{key}]: got {mine}, oracle {want}")
    return problems


# -- harness --------------------------------------------------------------

@dataclass
class EntryResult:
    id: str
    ok: bool = False
    phase: str = "parse"
    message: str = ""
    oracle: Optional[bool] = None
    deterministic: Optional[bool] = None
    seconds: dict = field(default_factory=dict)
    correlations: Optional[dict] = None
    outputs: bytes = b""

    def line(self) -> str:
        status = "PASS" if self.ok else f"FAIL({self.phase})"
        times = " ".join(f"W={w}:{s:.2f}s" for w, s in sorted(self.seconds.items()))
        oracle = {None: "n/a", True: "match", False: "MISMATCH"}[self.oracle]
        extra = f" {self.message}" if self.message else ""
        return f"{self.id:5} {status:14} oracle={oracle:8} {times}{extra}"


@dataclass
class CorpusReport:
    results: list

    @property
    def passed(self) -> int:
        return sum(r.ok for r in self.results)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def summary(self) -> str:
        lines = [r.line() for r in self.results]
        lines.append(f"{self.passed}/{len(self.results)} passed")
        return "\n".join(lines)


def run_entry(entry: CorpusEntry, dataset, *, params: Optional[dict] = None,
              workers: Iterable[int] = (1, 4), check_oracle: bool = True) -> EntryResult:
    res = EntryResult(entry.id)
    try:
        program = parse(entry.source)
        res.phase = "typecheck"
        program = apply_params(program, params or {})
        typed = typecheck(program)
        res.phase = "run"
        rendered, tables = {}, None
        for w in workers:
            t0 = time.perf_counter()
            tables = run(plan(typed, dataset, w))
            res.seconds[w] = time.perf_counter() - t0
            rendered[w] = render_output(tables, "json")
        res.outputs = next(iter(rendered.values()), b"")
        res.deterministic = len(set(rendered.values())) <= 1
        if not res.deterministic:
            res.phase = "determinism"
            res.message = "outputs differ across worker counts"
            return res
        if "mxy" in {t.name for t in tables}:
            res.correlations = correlations(tables)
        if check_oracle and entry.oracle:
            res.phase = "oracle"
            values = program_params(program)
            exp = oracles.expected(dataset, parse_date(values["date"]), values, entry.oracle)
            problems = compare(tables, exp)
            res.oracle = not problems
            if problems:
                res.message = "; ".join(problems[:3])
                return res
        res.phase = "done"
        res.ok = True
    except Exception as exc:  # the harness records the failure and moves on
        res.message = f"{type(exc).__name__}: {exc}"
    return res


def run_corpus(dataset, select: Union[None, str, Iterable[str], Callable] = None, *,
               params: Optional[dict] = None, workers: Iterable[int] = (1, 4),
               check_oracle: bool = True, manifest: Path = MANIFEST) -> CorpusReport:
    entries = select_entries(load_corpus(manifest), select)
    workers = tuple(workers)
    return CorpusReport([run_entry(e, dataset, params=params, workers=workers,
                                   check_oracle=check_oracle) for e in entries])


def check_all(manifest: Path = MANIFEST) -> dict:
    """Parse and type-check every entry; id -> error message or None."""
    out = {}
    for e in load_corpus(manifest):
        try:
            typecheck(parse(e.source))
            out[e.id] = None
        except Exception as exc:
            out[e.id] = f"{type(exc).__name__}: {exc}"
    return out
