"""Compile a typed AST into Python closures over a flat frame.

Every binding site got a frame slot from the checker, so a compiled
expression is just ``fn(frame) -> value``. Slot 0 holds the task's list of
aggregator states (the emission sink). ``None`` in the frame or as a result
means "absent": it propagates through arithmetic, makes comparisons false
and turns emissions into no-ops.
"""
from __future__ import annotations

import operator
from typing import Callable, Optional

from boat.domain import DateParseError, SpeedRoot, WeatherRoot, parse_date
from boat.lang import ast
from boat.lang.checker import SINK_SLOT, TypedProgram
from boat.lang.types import FLOAT, INT, Schema

Fn = Callable[[list], object]

_EMPTY_WEATHER = WeatherRoot(())
_EMPTY_SPEED = SpeedRoot(())


class EvaluationError(Exception):
    """A runtime failure while evaluating one county."""

    def __init__(self, message: str, line: int, col: int, county: Optional[str] = None):
        self.message, self.line, self.col, self.county = message, line, col, county
        where = f"line {line}, column {col}"
        if county is not None:
            where = f"county {county}, {where}"
        super().__init__(f"{where}: {message}")

    def __reduce__(self):
        return (EvaluationError, (self.message, self.line, self.col, self.county))

    def in_county(self, county: str) -> "EvaluationError":
        return EvaluationError(self.message, self.line, self.col, county)


class OutOfRange(EvaluationError):
    def __reduce__(self):
        return (OutOfRange, (self.message, self.line, self.col, self.county))

    def in_county(self, county: str) -> "EvaluationError":
        return OutOfRange(self.message, self.line, self.col, county)


class _Loader:
    """Block access for getweather/getspeed; ``None`` dataset means no data."""

    def __init__(self, dataset):
        self.dataset = dataset

    def weather(self, grid, day: int) -> WeatherRoot:
        if self.dataset is None or grid.weather_link is None:
            return _EMPTY_WEATHER
        records = self.dataset.get_weather(grid.id, day)
        return WeatherRoot(records) if records else _EMPTY_WEATHER

    def speed(self, grid, day: int) -> SpeedRoot:
        if self.dataset is None or grid.speed_link is None:
            return _EMPTY_SPEED
        records = self.dataset.get_speed(grid.id, day)
        return SpeedRoot(records) if records else _EMPTY_SPEED


def _truncdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


class Compiler:
    def __init__(self, schema: Schema, dataset=None, outputs: Optional[dict] = None):
        self.schema = schema
        self.loader = _Loader(dataset)
        self.outputs = outputs or {}

    # -- expressions ---------------------------------------------------
    def expr(self, e: ast.Expr) -> Fn:
        method = getattr(self, "_" + type(e).__name__.lower())
        return method(e)

    def _literal(self, e: ast.Literal) -> Fn:
        v = e.value
        return lambda f: v

    def _name(self, e: ast.Name) -> Fn:
        return operator.itemgetter(e.slot)

    def _field(self, e: ast.Field) -> Fn:
        spec = self.schema.field(e.base.ty.name, e.name)
        get = operator.attrgetter(spec.attr)
        base = self.expr(e.base)
        return lambda f: get(base(f))

    def _index(self, e: ast.Index) -> Fn:
        base, index = self.expr(e.base), self.expr(e.index)
        line, col = e.line, e.col

        def ix(f):
            seq = base(f)
            i = index(f)
            if i is None or i < 0 or i >= len(seq):
                raise OutOfRange(f"index {i} out of bounds for array of length {len(seq)}",
                                 line, col)
            return seq[i]
        return ix

    def _def(self, e: ast.Def) -> Fn:
        inner = self.expr(e.operand)

        def present(f):
            try:
                return inner(f) is not None
            except OutOfRange:
                return False
        return present

    def _call(self, e: ast.Call) -> Fn:
        if e.func == "len":
            arr = self.expr(e.args[0])
            return lambda f: len(arr(f))
        load = self.loader.weather if e.func == "getweather" else self.loader.speed
        grid = self.expr(e.args[0])
        date = e.args[1]
        if isinstance(date, ast.Literal):
            day = parse_date(date.value)
            return lambda f: load(grid(f), day)
        text = self.expr(date)
        line, col = date.line, date.col

        def dynamic(f):
            try:
                d = parse_date(text(f))
            except DateParseError as exc:
                raise EvaluationError(str(exc), line, col) from None
            return load(grid(f), d)
        return dynamic

    def _unary(self, e: ast.Unary) -> Fn:
        inner = self.expr(e.operand)
        if e.op == "!":
            return lambda f: not inner(f)

        def neg(f):
            v = inner(f)
            return None if v is None else -v
        return neg

    def _binary(self, e: ast.Binary) -> Fn:
        left, right = self.expr(e.left), self.expr(e.right)
        op = e.op
        if op == "&&":
            return lambda f: bool(left(f)) and bool(right(f))
        if op == "||":
            return lambda f: bool(left(f)) or bool(right(f))
        if op == "/":
            return self._divide(e, left, right)
        if op in ("+", "-", "*"):
            fn = {"+": operator.add, "-": operator.sub, "*": operator.mul}[op]

            def arith(f):
                a = left(f)
                if a is None:
                    return None
                b = right(f)
                if b is None:
                    return None
                return fn(a, b)
            return arith
        cmp = {"==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
               ">": operator.gt, ">=": operator.ge}[op]

        def compare(f):
            a, b = left(f), right(f)
            if a is None or b is None:
                return False
            return cmp(a, b)
        return compare

    def _divide(self, e: ast.Binary, left: Fn, right: Fn) -> Fn:
        integer = e.left.ty == INT and e.right.ty == INT
        line, col = e.line, e.col

        def div(f):
            a, b = left(f), right(f)
            if a is None or b is None:
                return None
            if b == 0:
                raise EvaluationError("division by zero", line, col)
            return _truncdiv(a, b) if integer else a / b
        return div

    # -- statements ----------------------------------------------------
    def block(self, stmts: list) -> Fn:
        fns = tuple(self.stmt(s) for s in stmts)
        if len(fns) == 1:
            return fns[0]

        def run(f):
            for fn in fns:
                fn(f)
        return run

    def stmt(self, s: ast.Stmt) -> Fn:
        method = getattr(self, "_s_" + type(s).__name__.lower())
        return method(s)

    def _s_inputdecl(self, s) -> Fn:
        return lambda f: None

    _s_outputdecl = _s_inputdecl

    def _s_vardecl(self, s: ast.VarDecl) -> Fn:
        value, slot = self.expr(s.value), s.slot

        def bind(f):
            f[slot] = value(f)
        return bind

    def _s_assign(self, s: ast.Assign) -> Fn:
        slot = s.target.slot
        if s.op in ("++", "--"):
            step = 1 if s.op == "++" else -1

            def bump(f):
                v = f[slot]
                if v is not None:
                    f[slot] = v + step
            return bump
        value = self.expr(s.value)
        widen = s.target.ty == FLOAT and s.value.ty == INT

        def assign(f):
            v = value(f)
            f[slot] = float(v) if widen and v is not None else v
        return assign

    def _s_exprstmt(self, s: ast.ExprStmt) -> Fn:
        return self.expr(s.expr)

    def _s_if(self, s: ast.If) -> Fn:
        cond, then = self.expr(s.condition), self.block(s.then)
        orelse = self.block(s.orelse) if s.orelse is not None else None

        def branch(f):
            if cond(f):
                then(f)
            elif orelse is not None:
                orelse(f)
        return branch

    def _s_foreach(self, s: ast.ForEach) -> Fn:
        domain = self.expr(s.domain)
        body = self.block(s.body)
        slot = s.slot
        if s.trivial:
            def loop(f):
                for i in range(len(domain(f))):
                    f[slot] = i
                    body(f)
            return loop
        cond = self.expr(s.condition)

        def filtered(f):
            for i in range(len(domain(f))):
                f[slot] = i
                if cond(f):
                    body(f)
        return filtered

    def _s_visit(self, s: ast.Visit) -> Fn:
        target = self.expr(s.target)
        county = grid = None
        for c in s.clauses:
            pair = (c.slot, self.block(c.body))
            if c.type_name == "County":
                county = pair
            else:
                grid = pair

        def visit(f):
            node = target(f)
            if hasattr(node, "grids"):
                if county is not None:
                    f[county[0]] = node
                    county[1](f)
                grids = node.grids
            else:
                grids = (node,)
            if grid is not None:
                gslot, gbody = grid
                for g in grids:
                    f[gslot] = g
                    gbody(f)
        return visit

    def _s_emit(self, s: ast.Emit) -> Fn:
        sig = self.outputs[s.output]
        pos = sig.position
        value = self.expr(s.value)
        index = self.expr(s.index) if s.index is not None else None
        weight = self.expr(s.weight) if s.weight is not None else None
        as_float_value = (sig.kind in ("mean", "stdev") or sig.value_type == FLOAT) \
            and s.value.ty == INT
        as_float_weight = weight is not None and sig.weight_type == FLOAT and s.weight.ty == INT

        def emit(f):
            v = value(f)
            if v is None:
                return
            if as_float_value:
                v = float(v)
            w = None
            if weight is not None:
                w = weight(f)
                if w is None:
                    return
                if as_float_weight:
                    w = float(w)
            state = f[SINK_SLOT][pos]
            if index is None:
                state.emit(v, w)
            else:
                state.emit_at(index(f), v, w)
        return emit


def compile_program(typed: TypedProgram, schema: Schema, dataset=None) -> Fn:
    """Return ``main(frame)`` for the whole program body."""
    comp = Compiler(schema, dataset, typed.outputs)
    return comp.block(typed.program.statements)
