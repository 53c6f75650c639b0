"""Mergeable output aggregators.

Each aggregator folds emissions into a private state; states from different
map tasks combine with :meth:`absorb` (in place) or :meth:`merge` (new
object), and :meth:`finalize` turns a state into deterministic rows.

Ordering ties are always broken by the natural order of the emitted value so
results never depend on how emissions were partitioned.
"""
from __future__ import annotations

import copy
import heapq
import math
from dataclasses import dataclass
from typing import Any, Optional

KINDS = ("mean", "stdev", "maximum", "minimum", "top", "quantile")


class AggregatorError(ValueError):
    """Invalid aggregator construction."""


class MergeError(TypeError):
    """Attempt to merge incompatible states (an engine bug)."""


@dataclass(frozen=True)
class Row:
    index: Optional[str]
    rank: int
    value: Any
    weight: Any = None


@dataclass(frozen=True)
class OutputTable:
    name: str
    kind: str
    rows: tuple[Row, ...]


def _msum_add(partials: list[float], x: float) -> None:
    # Shewchuk's exact summation: partials stay non-overlapping.
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]


class State:
    kind = ""
    argument: Optional[int] = None

    def emit(self, value, weight=None) -> None:
        raise NotImplementedError

    def absorb(self, other: "State") -> "State":
        raise NotImplementedError

    def finalize(self, index: Optional[str] = None) -> list[Row]:
        raise NotImplementedError

    def merge(self, other: "State") -> "State":
        return copy.deepcopy(self).absorb(other)

    def copy(self) -> "State":
        return copy.deepcopy(self)

    def _check(self, other: "State") -> None:
        if (type(other) is not type(self) or other.kind != self.kind
                or other.argument != self.argument):
            raise MergeError(
                f"cannot merge {other.kind}({other.argument}) into {self.kind}({self.argument})")


class Moments(State):
    """Count, running mean and M2 (sum of squared deviations)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def emit(self, value, weight=None) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    def absorb(self, other: "State") -> "State":
        self._check(other)
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self


class Mean(Moments):
    kind = "mean"

    def finalize(self, index=None):
        if self.count == 0:
            return []
        return [Row(index, 0, self.mean)]


class StDev(Moments):
    kind = "stdev"

    def finalize(self, index=None):
        if self.count == 0:
            return []
        return [Row(index, 0, math.sqrt(max(self.m2, 0.0) / self.count))]


class _Bounded(State):
    """Keeps the n extreme (weight, value) emissions, buffering lazily."""

    def __init__(self, n: int, weighted: bool = True):
        self.argument = n
        self.weighted = weighted
        self.items: list[tuple] = []
        self._limit = max(4 * n, 256)

    def _key(self, item):
        raise NotImplementedError

    def _trim(self) -> None:
        self.items = heapq.nsmallest(self.argument, self.items, key=self._key)

    def emit(self, value, weight=None) -> None:
        self.items.append((value if weight is None else weight, value))
        if len(self.items) > self._limit:
            self._trim()

    def absorb(self, other):
        self._check(other)
        self.items.extend(other.items)
        self._trim()
        return self

    def finalize(self, index=None):
        best = sorted(self.items, key=self._key)[: self.argument]
        return [Row(index, r, v, w if self.weighted else None)
                for r, (w, v) in enumerate(best, start=1)]


class Maximum(_Bounded):
    kind = "maximum"

    def _key(self, item):
        return (-item[0], item[1])


class Minimum(_Bounded):
    kind = "minimum"

    def _key(self, item):
        return (item[0], item[1])


class Top(State):
    """Exact value -> accumulated weight map; finalizes the n heaviest."""

    kind = "top"

    def __init__(self, n: int):
        self.argument = n
        self.totals: dict[Any, list] = {}

    def emit(self, value, weight=None) -> None:
        acc = self.totals.get(value)
        if acc is None:
            acc = self.totals[value] = [0, []]
        if weight is None:
            acc[0] += 1
        elif isinstance(weight, int):
            acc[0] += weight
        else:
            _msum_add(acc[1], weight)

    def absorb(self, other):
        self._check(other)
        for value, (count, partials) in other.totals.items():
            acc = self.totals.get(value)
            if acc is None:
                self.totals[value] = [count, list(partials)]
                continue
            acc[0] += count
            for p in partials:
                _msum_add(acc[1], p)
        return self

    @staticmethod
    def _total(acc):
        count, partials = acc
        if not partials:
            return count
        return math.fsum(partials + [float(count)])

    def finalize(self, index=None):
        ranked = sorted(((self._total(acc), v) for v, acc in self.totals.items()),
                        key=lambda t: (-t[0], t[1]))
        return [Row(index, r, v, w) for r, (w, v) in enumerate(ranked[: self.argument], start=1)]


class Quantile(State):
    """Exact multiset; finalizes the n-1 nearest-rank boundaries."""

    kind = "quantile"

    def __init__(self, n: int):
        self.argument = n
        self.values: list = []

    def emit(self, value, weight=None) -> None:
        self.values.append(value)

    def absorb(self, other):
        self._check(other)
        self.values.extend(other.values)
        return self

    def finalize(self, index=None):
        if not self.values:
            return []
        ordered = sorted(self.values)
        n, size = self.argument, len(ordered)
        rows = []
        for k in range(1, n):
            pos = -(-k * size // n)  # ceil(k*N/n), 1-based
            rows.append(Row(index, k, ordered[max(pos, 1) - 1]))
        return rows


class Indexed(State):
    """Per-key sub-states for an output declared with ``[string]``."""

    def __init__(self, kind: str, argument: Optional[int], weighted: bool = True):
        self.kind = kind
        self.argument = argument
        self.weighted = weighted
        self.parts: dict[str, State] = {}

    def emit_at(self, index: str, value, weight=None) -> None:
        part = self.parts.get(index)
        if part is None:
            part = self.parts[index] = _make(self.kind, self.argument, self.weighted)
        part.emit(value, weight)

    def emit(self, value, weight=None) -> None:
        raise AggregatorError(f"indexed {self.kind} output requires an index")

    def absorb(self, other):
        self._check(other)
        for key, part in other.parts.items():
            mine = self.parts.get(key)
            if mine is None:
                self.parts[key] = part.copy()
            else:
                mine.absorb(part)
        return self

    def finalize(self, index=None):
        rows = []
        for key in sorted(self.parts):
            rows.extend(self.parts[key].finalize(key))
        return rows


def _check_argument(kind: str, argument: Optional[int]) -> None:
    if kind not in KINDS:
        raise AggregatorError(f"unknown aggregator {kind!r}")
    if kind in ("mean", "stdev"):
        if argument is not None:
            raise AggregatorError(f"{kind} takes no argument")
        return
    if argument is None or isinstance(argument, bool) or not isinstance(argument, int):
        raise AggregatorError(f"{kind} requires an integer argument")
    minimum = 2 if kind == "quantile" else 1
    if argument < minimum:
        raise AggregatorError(f"{kind} argument must be >= {minimum}, got {argument}")


def _make(kind: str, argument: Optional[int], weighted: bool) -> State:
    if kind == "mean":
        return Mean()
    if kind == "stdev":
        return StDev()
    if kind == "maximum":
        return Maximum(argument, weighted)
    if kind == "minimum":
        return Minimum(argument, weighted)
    if kind == "top":
        return Top(argument)
    return Quantile(argument)


def new_state(kind: str, argument: Optional[int] = None, *, indexed: bool = False,
              weighted: bool = True) -> State:
    """Create an empty aggregator state.

    ``weighted`` only matters for maximum/minimum: unweighted states order
    emissions by the value itself and report no weight.
    """
    _check_argument(kind, argument)
    if indexed:
        return Indexed(kind, argument, weighted)
    return _make(kind, argument, weighted)


def emit(state: State, index: Optional[str], value, weight=None) -> State:
    if isinstance(state, Indexed):
        if index is None:
            raise AggregatorError(f"indexed {state.kind} output requires an index")
        state.emit_at(index, value, weight)
    else:
        if index is not None:
            raise AggregatorError(f"{state.kind} output is not indexed")
        state.emit(value, weight)
    return state


def merge(a: State, b: State) -> State:
    return a.merge(b)


def finalize(name: str, state: State) -> OutputTable:
    return OutputTable(name, state.kind, tuple(state.finalize()))
