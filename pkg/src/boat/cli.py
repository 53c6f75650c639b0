"""Command line entry point: ``boat {gen,ingest,run,inspect,corpus,bench}``.

Results go to stdout, diagnostics to stderr. Every failure ends with one
line ``ERR_<CODE>: message``. Exit status: 0 success, 1 user error, 2
internal error.
"""
from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from boat import __version__

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2
DATA_ENV = "BOAT_DATA"


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int = EXIT_USER, usage: str = ""):
        self.code, self.message, self.status, self.usage = code, message, status, usage
        super().__init__(message)


def _fail(code: str, message: str) -> CliError:
    return CliError(code, message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("ERR_USAGE", message, usage=self.format_usage())


@dataclass(frozen=True)
class RunConfig:
    data: Path
    program: Path
    workers: int = 1
    format: str = "text"
    output: Optional[Path] = None

    def __post_init__(self):
        from boat.engine import FORMATS
        if self.workers < 1:
            raise _fail("ERR_USAGE", f"--workers must be >= 1, got {self.workers}")
        if self.format not in FORMATS:
            raise _fail("ERR_USAGE", f"--format must be one of {', '.join(FORMATS)}")


def _worker_list(text: str) -> tuple[int, ...]:
    try:
        ws = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not ws or any(w < 1 for w in ws):
        raise argparse.ArgumentTypeError("worker counts must be integers >= 1")
    return ws


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _data_path(args) -> Path:
    path = args.data or os.environ.get(DATA_ENV)
    if not path:
        raise _fail("ERR_USAGE", f"no dataset: pass --data or set {DATA_ENV}")
    return Path(path)


def _open(path: Path):
    from boat.storage import StorageError, open_dataset
    try:
        return open_dataset(path)
    except FileNotFoundError as exc:
        raise _fail("ERR_IO", f"cannot open dataset {path}: {exc.strerror or exc}") from None
    except StorageError as exc:
        raise _fail("ERR_STORAGE", str(exc)) from None


def _params(items) -> dict:
    from boat.corpus import parse_param
    out = {}
    for item in items or ():
        try:
            name, value = parse_param(item)
        except ValueError as exc:
            raise _fail("ERR_USAGE", str(exc)) from None
        out[name] = value
    return out


def _compile(path: Path, params: dict):
    from boat.corpus import apply_params
    from boat.lang import LexError, ParseError, TypeCheckError, parse, typecheck
    try:
        source = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise _fail("ERR_IO", f"cannot read program {path}: {exc.strerror}") from None
    try:
        program = apply_params(parse(source), params)
    except (LexError, ParseError) as exc:
        raise _fail("ERR_PARSE", f"{path}: {exc}") from None
    except TypeError as exc:
        raise _fail("ERR_USAGE", str(exc)) from None
    try:
        return typecheck(program)
    except TypeCheckError as exc:
        raise _fail("ERR_TYPE", f"{path}: {exc}") from None


def _execute(typed, ds, workers: int):
    from boat.engine import EvaluationError, PlanError, plan, run
    from boat.storage import StorageError
    try:
        return run(plan(typed, ds, workers))
    except PlanError as exc:
        raise _fail("ERR_PLAN", str(exc)) from None
    except EvaluationError as exc:
        raise _fail("ERR_RUNTIME", str(exc)) from None
    except StorageError as exc:
        raise _fail("ERR_STORAGE", str(exc)) from None


# -- subcommands ------------------------------------------------------------

def cmd_gen(args, out, err) -> int:
    from boat.ingest import SyntheticSpec, generate_synthetic
    try:
        spec = SyntheticSpec(seed=args.seed, counties=args.counties,
                             grids_per_county=args.grids, days=args.days,
                             start_date=args.start_date, weather_interval=args.weather_interval,
                             speed_interval=args.speed_interval,
                             speed_grids_per_county=args.speed_grids,
                             detectors_per_grid=args.detectors)
    except ValueError as exc:
        raise _fail("ERR_USAGE", str(exc)) from None
    paths = generate_synthetic(spec, args.out)
    for kind, p in paths.items():
        out.write(f"{kind}\t{p}\t{p.stat().st_size}\n")
    return EXIT_OK


def cmd_ingest(args, out, err) -> int:
    from boat.ingest import IngestError, ingest
    from boat.storage import StorageError
    target = args.out or args.data or os.environ.get(DATA_ENV)
    if not target:
        raise _fail("ERR_USAGE", f"no output dataset: pass --out or set {DATA_ENV}")
    if not 0 <= args.max_reject_rate <= 1:
        raise _fail("ERR_USAGE", "--max-reject-rate must be in [0, 1]")
    try:
        report = ingest(args.weather or [], args.speed or [], args.metadata, target,
                        max_reject_rate=args.max_reject_rate)
    except IngestError as exc:
        raise _fail("ERR_INGEST", str(exc)) from None
    except StorageError as exc:
        raise _fail("ERR_STORAGE", str(exc)) from None
    out.write(report.summary() + "\n")
    return EXIT_OK


def cmd_run(args, out, err) -> int:
    from boat.engine import render_output
    cfg = RunConfig(_data_path(args), Path(args.program), args.workers, args.format,
                    Path(args.output) if args.output else None)
    typed = _compile(cfg.program, _params(args.param))
    with _open(cfg.data) as ds:
        tables = _execute(typed, ds, cfg.workers)
    data = render_output(tables, cfg.format)
    if cfg.output is not None:
        try:
            cfg.output.write_bytes(data)
        except OSError as exc:
            raise _fail("ERR_IO", f"cannot write {cfg.output}: {exc.strerror}") from None
    else:
        out.write(data.decode("utf-8"))
    return EXIT_OK


def cmd_inspect(args, out, err) -> int:
    from boat.storage import StorageError
    with _open(_data_path(args)) as ds:
        if args.verify:
            try:
                ds.verify()
            except StorageError as exc:
                raise _fail("ERR_STORAGE", str(exc)) from None
        st = ds.stats()
    out.write(f"counties\t{st.county_count}\n")
    out.write(f"grids\t{st.grid_count}\n")
    out.write(f"manifest_bytes\t{st.manifest_bytes}\n")
    for kind, k in st.kinds.items():
        ratio = "n/a" if k.ratio is None else f"{k.ratio:.2f}"
        raw = "n/a" if k.raw_bytes is None else str(k.raw_bytes)
        out.write(f"{kind}\tblocks={k.blocks}\trecords={k.records}\tbytes={k.file_bytes}"
                  f"\traw_bytes={raw}\tratio={ratio}\n")
    out.write(f"total_bytes\t{st.total_bytes}\n")
    out.write(f"total_records\t{st.total_records}\n")
    out.write("ratio\t" + ("n/a" if st.ratio is None else f"{st.ratio:.2f}") + "\n")
    if args.verify:
        out.write("verify\tok\n")
    return EXIT_OK


def cmd_corpus(args, out, err) -> int:
    from boat.corpus import check_all, run_corpus
    if args.check_only:
        problems = check_all()
        for tid, msg in problems.items():
            out.write(f"{tid:5} {'ok' if msg is None else 'FAIL ' + msg}\n")
        bad = [t for t, m in problems.items() if m]
        out.write(f"{len(problems) - len(bad)}/{len(problems)} parse and type-check\n")
        if bad:
            raise _fail("ERR_CORPUS", f"{len(bad)} program(s) failed: {', '.join(bad)}")
        return EXIT_OK
    with _open(_data_path(args)) as ds:
        report = run_corpus(ds, args.select or None, params=_params(args.param),
                            workers=args.workers, check_oracle=not args.no_oracle)
    out.write(report.summary() + "\n")
    if not report.results:
        raise _fail("ERR_USAGE", "selection matched no corpus entries")
    if not report.ok:
        failed = [r.id for r in report.results if not r.ok]
        raise _fail("ERR_CORPUS", f"{len(failed)} entr{'y' if len(failed) == 1 else 'ies'} "
                                  f"failed: {', '.join(failed)}")
    return EXIT_OK


def bench(typed, ds, workers, repeats: int) -> list[tuple[int, float, float]]:
    """(workers, median seconds, speedup vs the first worker count) rows."""
    medians = []
    for w in workers:
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            _execute(typed, ds, w)
            times.append(time.perf_counter() - t0)
        medians.append((w, statistics.median(times)))
    base = medians[0][1]
    return [(w, m, base / m if m > 0 else float("inf")) for w, m in medians]


def cmd_bench(args, out, err) -> int:
    typed = _compile(Path(args.program), _params(args.param))
    with _open(_data_path(args)) as ds:
        rows = bench(typed, ds, args.workers, args.repeats)
    out.write("workers,median_seconds,speedup\n")
    for w, m, s in rows:
        out.write(f"{w},{m:.6f},{s:.3f}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="boat", description="Domain-specific queries over transportation data.")
    p.add_argument("--version", action="version", version=f"boat {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="write synthetic CSV feeds")
    g.add_argument("--out", required=True, help="directory for grids.csv, weather.csv, speed.csv")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--counties", type=int, default=2)
    g.add_argument("--grids", type=int, default=2, help="grids per county")
    g.add_argument("--days", type=int, default=1)
    g.add_argument("--start-date", default="5-11-2017", help="first day, M-D-YYYY")
    g.add_argument("--weather-interval", type=int, default=300, help="seconds")
    g.add_argument("--speed-interval", type=int, default=20, help="seconds")
    g.add_argument("--speed-grids", type=int, default=None,
                   help="grids per county carrying speed detectors (default: all)")
    g.add_argument("--detectors", type=int, default=1, help="detectors per speed grid")
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("ingest", help="build a dataset from CSV feeds")
    i.add_argument("--metadata", required=True, help="grid metadata CSV")
    i.add_argument("--weather", action="append", help="weather CSV (repeatable)")
    i.add_argument("--speed", action="append", help="speed CSV (repeatable)")
    i.add_argument("--out", help=f"dataset directory (default ${DATA_ENV})")
    i.add_argument("--data", help=argparse.SUPPRESS)
    i.add_argument("--max-reject-rate", type=float, default=0.05)
    i.set_defaults(func=cmd_ingest)

    r = sub.add_parser("run", help="run a program over a dataset")
    r.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
    r.add_argument("--program", required=True)
    r.add_argument("--workers", type=_positive, default=1)
    r.add_argument("--format", choices=("text", "csv", "json"), default="text")
    r.add_argument("--output", help="write results here instead of stdout")
    r.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="override a top-level literal variable")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("inspect", help="print dataset statistics")
    s.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
    s.add_argument("--verify", action="store_true", help="also check every checksum")
    s.set_defaults(func=cmd_inspect)

    c = sub.add_parser("corpus", help="run the task corpus against its oracles")
    c.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
    c.add_argument("--select", action="append", metavar="PATTERN", help="task id or glob, e.g. A.*")
    c.add_argument("--workers", type=_worker_list, default=(1, 4))
    c.add_argument("--param", action="append", metavar="NAME=VALUE")
    c.add_argument("--no-oracle", action="store_true")
    c.add_argument("--check-only", action="store_true", help="parse and type-check only")
    c.set_defaults(func=cmd_corpus)

    b = sub.add_parser("bench", help="time a program at several worker counts")
    b.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
    b.add_argument("--program", required=True)
    b.add_argument("--workers", type=_worker_list, default=(1, 2, 4, 8))
    b.add_argument("--repeats", type=_positive, default=5)
    b.add_argument("--param", action="append", metavar="NAME=VALUE")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except CliError as exc:
        err.write(exc.usage)
        err.write(f"{exc.code}: {' '.join(exc.message.split())}\n")
        return exc.status
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except KeyboardInterrupt:
        err.write("ERR_INTERRUPTED: interrupted\n")
        return EXIT_USER
    except Exception as exc:  # anything else is a bug
        err.write(f"ERR_INTERNAL: {type(exc).__name__}: {' '.join(str(exc).split())}\n")
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
