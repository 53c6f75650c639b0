"""Plan and run: one map task per county, canonical merge, finalize."""
from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from boat import aggregators
from boat.aggregators import OutputTable
from boat.domain import County
from boat.engine.compiler import EvaluationError, compile_program
from boat.lang.checker import SINK_SLOT, TypedProgram
from boat.lang.types import DEFAULT_SCHEMA

SCHEMAS = {DEFAULT_SCHEMA.version: DEFAULT_SCHEMA}


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ExecutionPlan:
    typed: TypedProgram
    dataset: object
    workers: int
    loads: frozenset
    units: tuple[str, ...]  # county codes, ascending


@dataclass
class EvaluationContext:
    """Named bindings for :func:`evaluate`; ``dataset`` backs getweather/getspeed."""

    env: dict = field(default_factory=dict)
    county: Optional[County] = None
    dataset: object = None


def plan(typed: TypedProgram, dataset, workers: int) -> ExecutionPlan:
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise PlanError(f"worker count must be an integer >= 1, got {workers!r}")
    if dataset.schema_version != typed.schema_version:
        raise PlanError(f"dataset schema {dataset.schema_version!r} does not match "
                        f"program schema {typed.schema_version!r}")
    if typed.schema_version not in SCHEMAS:
        raise PlanError(f"no schema registered for {typed.schema_version!r}")
    units = tuple(sorted(c.code for c in dataset.counties))
    return ExecutionPlan(typed, dataset, workers, typed.loads, units)


class _Task:
    """Compiled program plus dataset; evaluates one county at a time."""

    def __init__(self, typed: TypedProgram, dataset):
        self.typed = typed
        self.dataset = dataset
        self.main = compile_program(typed, SCHEMAS[typed.schema_version], dataset)
        self.order = typed.output_order
        self.input_slot = typed.program.statements[0].slot

    def fresh_states(self) -> list:
        return [aggregators.new_state(s.kind, s.argument, indexed=s.indexed,
                                      weighted=s.weight_type is not None) for s in self.order]

    def __call__(self, code: str) -> list:
        county = self.dataset.county_by_code[code]
        frame = [None] * self.typed.slot_count
        frame[SINK_SLOT] = states = self.fresh_states()
        frame[self.input_slot] = county
        try:
            self.main(frame)
        except EvaluationError as exc:
            raise exc.in_county(f"{county.code} ({county.name})") from None
        return states


_WORKER: Optional[_Task] = None


def _init_worker(typed: TypedProgram, path: str) -> None:
    global _WORKER
    from boat.storage import open_dataset
    _WORKER = _Task(typed, open_dataset(path))


def _run_unit(code: str) -> list:
    return _WORKER(code)


def _pool_context():
    methods = multiprocessing.get_all_start_methods()
    return multiprocessing.get_context("fork" if "fork" in methods else "spawn")


def run(p: ExecutionPlan) -> tuple[OutputTable, ...]:
    """Evaluate every county, merge in ascending code order, finalize by name."""
    task = _Task(p.typed, p.dataset)
    results: dict[str, list] = {}
    if p.workers == 1 or len(p.units) <= 1:
        for code in p.units:
            results[code] = task(code)
    else:
        workers = min(p.workers, len(p.units))
        with ProcessPoolExecutor(workers, mp_context=_pool_context(), initializer=_init_worker,
                                 initargs=(p.typed, str(p.dataset.path))) as pool:
            futures = {code: pool.submit(_run_unit, code) for code in p.units}
            try:
                for code in p.units:
                    results[code] = futures[code].result()
            except BaseException:
                for fut in futures.values():
                    fut.cancel()
                raise
    merged = task.fresh_states()
    for code in p.units:
        for acc, part in zip(merged, results[code]):
            acc.absorb(part)
    tables = [aggregators.finalize(sig.name, st) for sig, st in zip(task.order, merged)]
    return tuple(sorted(tables, key=lambda t: t.name))


def cpu_count() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1
