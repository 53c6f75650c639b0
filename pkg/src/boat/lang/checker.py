"""Static checking: name resolution, typing and emission rules.

``typecheck`` returns a :class:`TypedProgram` whose tree is an annotated copy
of the input: every expression carries ``ty``, every binding site a frame
slot, and every ``foreach`` the array it scans.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

from boat import aggregators
from boat.domain import DateParseError, parse_date
from boat.lang import ast
from boat.lang.types import (BOOL, BUILTINS, DEFAULT_SCHEMA, FLOAT, INT, PRIMITIVES, STRING,
                             Schema, Type, domain)

SINK_SLOT = 0


class TypeCheckError(Exception):
    def __init__(self, message: str, line: int, col: int):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: {message}")


@dataclass(frozen=True)
class OutputSig:
    name: str
    kind: str
    argument: Optional[int]
    indexed: bool
    value_type: Type
    weight_type: Optional[Type]
    position: int


@dataclass(frozen=True)
class TypedProgram:
    program: ast.Program
    outputs: dict
    input_name: str
    loads: frozenset
    builtins: frozenset
    slot_count: int
    schema_version: str

    @property
    def output_order(self) -> list[OutputSig]:
        return sorted(self.outputs.values(), key=lambda s: s.position)


@dataclass
class _Binding:
    type: Type
    slot: int
    role: str  # input | var | loop


def _err(node: ast.Node, message: str):
    raise TypeCheckError(message, node.line, node.col)


def _assignable(target: Type, source: Type) -> bool:
    return target == source or (target == FLOAT and source == INT)


class _Checker:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.scopes: list[dict[str, _Binding]] = [{}]
        self.outputs: dict[str, OutputSig] = {}
        self.next_slot = SINK_SLOT + 1
        self.loads: set[str] = set()
        self.builtins: set[str] = set()
        self.input_name: Optional[str] = None

    # -- scopes -------------------------------------------------------
    def lookup(self, name: str) -> Optional[_Binding]:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def bind(self, node: ast.Node, name: str, ty: Type, role: str) -> int:
        if name in self.scopes[-1]:
            _err(node, f"'{name}' is already declared in this scope")
        if name in self.outputs:
            _err(node, f"'{name}' is already declared as an output")
        slot = self.next_slot
        self.next_slot += 1
        self.scopes[-1][name] = _Binding(ty, slot, role)
        return slot

    def block(self, stmts: list[ast.Stmt]) -> None:
        self.scopes.append({})
        for s in stmts:
            self.stmt(s, top=False)
        self.scopes.pop()

    def resolve_type(self, node: ast.Node, name: str) -> Type:
        if name in PRIMITIVES:
            return PRIMITIVES[name]
        if name in self.schema.types:
            return domain(name)
        _err(node, f"unknown type '{name}'")

    # -- statements ---------------------------------------------------
    def program(self, prog: ast.Program) -> None:
        inputs = [s for s in prog.statements if isinstance(s, ast.InputDecl)]
        if len(inputs) != 1:
            where = inputs[1] if len(inputs) > 1 else prog
            _err(where, f"a program needs exactly one input declaration, found {len(inputs)}")
        if not isinstance(prog.statements[0], ast.InputDecl):
            _err(prog.statements[0], "the input declaration must be the first statement")
        for s in prog.statements:
            self.stmt(s, top=True)

    def stmt(self, s: ast.Stmt, top: bool) -> None:
        if isinstance(s, ast.InputDecl):
            if not top:
                _err(s, "input declarations are only allowed at top level")
            if s.type_name != "County":
                _err(s, f"program input must be of type County, not {s.type_name}")
            s.slot = self.bind(s, s.name, domain("County"), "input")
            self.input_name = s.name
        elif isinstance(s, ast.OutputDecl):
            self.output_decl(s, top)
        elif isinstance(s, ast.VarDecl):
            ty = self.expr(s.value)
            s.slot = self.bind(s, s.name, ty, "var")
        elif isinstance(s, ast.Assign):
            self.assign(s)
        elif isinstance(s, ast.ForEach):
            self.foreach(s)
        elif isinstance(s, ast.Visit):
            self.visit(s)
        elif isinstance(s, ast.Emit):
            self.emit(s)
        elif isinstance(s, ast.If):
            if self.expr(s.condition) != BOOL:
                _err(s.condition, f"if condition must be bool, not {s.condition.ty}")
            self.block(s.then)
            if s.orelse is not None:
                self.block(s.orelse)
        elif isinstance(s, ast.ExprStmt):
            self.expr(s.expr)
        else:  # pragma: no cover - parser never builds other nodes
            _err(s, f"unsupported statement {type(s).__name__}")

    def output_decl(self, s: ast.OutputDecl, top: bool) -> None:
        if not top:
            _err(s, "output declarations are only allowed at top level")
        if s.name in self.outputs or self.lookup(s.name) is not None:
            _err(s, f"'{s.name}' is already declared")
        if s.aggregator not in aggregators.KINDS:
            _err(s, f"unknown aggregator '{s.aggregator}' "
                    f"(expected one of {', '.join(aggregators.KINDS)})")
        try:
            aggregators._check_argument(s.aggregator, s.argument)
        except aggregators.AggregatorError as exc:
            _err(s, str(exc))
        if s.index_type is not None and s.index_type != "string":
            _err(s, f"output index type must be string, not {s.index_type}")
        value_type = self.resolve_type(s, s.value_type)
        if value_type.name not in PRIMITIVES:
            _err(s, f"output values must be primitive, not {value_type}")
        if s.aggregator in ("mean", "stdev", "quantile") and not value_type.numeric:
            _err(s, f"{s.aggregator} output needs a numeric value type, not {value_type}")
        if s.aggregator in ("maximum", "minimum") and s.weight_type is None \
                and value_type not in (INT, FLOAT, STRING):
            _err(s, f"unweighted {s.aggregator} cannot order {value_type} values")
        weight_type = None
        if s.weight_type is not None:
            if s.aggregator not in ("maximum", "minimum", "top"):
                _err(s, f"{s.aggregator} output does not take a weight")
            weight_type = self.resolve_type(s, s.weight_type)
            if not weight_type.numeric:
                _err(s, f"weight type must be numeric, not {weight_type}")
        self.outputs[s.name] = OutputSig(s.name, s.aggregator, s.argument, s.index_type is not None,
                                         value_type, weight_type, len(self.outputs))

    def assign(self, s: ast.Assign) -> None:
        b = self.lookup(s.target.id)
        if b is None:
            if s.target.id in self.outputs:
                _err(s, f"output '{s.target.id}' can only be written with '<<'")
            _err(s, f"unknown identifier '{s.target.id}'")
        if b.role == "input":
            _err(s, f"input '{s.target.id}' cannot be assigned")
        s.target.slot = b.slot
        s.target.ty = b.type
        if s.op == "=":
            ty = self.expr(s.value)
            if not _assignable(b.type, ty):
                _err(s.value, f"cannot assign {ty} to '{s.target.id}' of type {b.type}")
        elif not b.type.numeric:
            _err(s, f"'{s.op}' needs a numeric variable, '{s.target.id}' is {b.type}")

    def foreach(self, s: ast.ForEach) -> None:
        if s.type_name != "int":
            _err(s, f"foreach variable must be int, not {s.type_name}")
        self.scopes.append({})
        s.slot = self.bind(s, s.var, INT, "loop")
        if self.expr(s.condition) != BOOL:
            _err(s.condition, f"foreach condition must be bool, not {s.condition.ty}")
        domains = []
        for node in ast.walk(s.condition):
            if (isinstance(node, ast.Index) and isinstance(node.index, ast.Name)
                    and node.index.slot == s.slot and node.base.ty.name == "array"):
                uses_var = any(isinstance(n, ast.Name) and n.slot == s.slot
                               for n in ast.walk(node.base))
                if not uses_var:
                    domains.append(node.base)
        if not domains:
            _err(s.condition, f"foreach condition must index an array with '{s.var}'")
        if any(d != domains[0] for d in domains[1:]):
            _err(s.condition, f"foreach condition indexes more than one array with '{s.var}'")
        s.domain = domains[0]
        cond = s.condition
        s.trivial = (isinstance(cond, ast.Def) and isinstance(cond.operand, ast.Index)
                     and cond.operand.base is domains[0])
        for stmt in s.body:
            self.stmt(stmt, top=False)
        self.scopes.pop()

    def visit(self, s: ast.Visit) -> None:
        ty = self.expr(s.target)
        if ty.name not in ("County", "Grid"):
            _err(s.target, f"visit target must be a County or Grid, not {ty}")
        seen = set()
        for c in s.clauses:
            if c.type_name not in ("County", "Grid"):
                _err(c, f"visitors can only match County or Grid nodes, not {c.type_name}")
            if c.type_name in seen:
                _err(c, f"duplicate before clause for {c.type_name}")
            if ty.name == "Grid" and c.type_name == "County":
                _err(c, "a Grid traversal never reaches a County node")
            seen.add(c.type_name)
            self.scopes.append({})
            c.slot = self.bind(c, c.var, domain(c.type_name), "loop")
            for stmt in c.body:
                self.stmt(stmt, top=False)
            self.scopes.pop()

    def emit(self, s: ast.Emit) -> None:
        sig = self.outputs.get(s.output)
        if sig is None:
            _err(s, f"unknown output '{s.output}'")
        if sig.indexed and s.index is None:
            _err(s, f"output '{s.output}' is indexed; emit with {s.output}[key] << ...")
        if not sig.indexed and s.index is not None:
            _err(s, f"output '{s.output}' is not indexed")
        if s.index is not None:
            ity = self.expr(s.index)
            if ity != STRING:
                _err(s.index, f"index of '{s.output}' must be string, not {ity}")
        vty = self.expr(s.value)
        if sig.kind in ("mean", "stdev"):
            ok = vty.numeric
        else:
            ok = _assignable(sig.value_type, vty)
        if not ok:
            _err(s.value, f"cannot emit {vty} to '{s.output}' ({sig.kind} of {sig.value_type})")
        if s.weight is not None:
            if sig.weight_type is None:
                _err(s.weight, f"output '{s.output}' takes no weight")
            wty = self.expr(s.weight)
            if not _assignable(sig.weight_type, wty):
                _err(s.weight, f"cannot use {wty} as weight of '{s.output}' "
                               f"(expects {sig.weight_type})")
        elif sig.weight_type is not None and sig.kind != "top":
            _err(s, f"output '{s.output}' requires a weight")

    # -- expressions --------------------------------------------------
    def expr(self, e: ast.Expr) -> Type:
        e.ty = self._expr(e)
        return e.ty

    def _expr(self, e: ast.Expr) -> Type:
        if isinstance(e, ast.Literal):
            return PRIMITIVES[e.kind]
        if isinstance(e, ast.Name):
            b = self.lookup(e.id)
            if b is None:
                if e.id in self.outputs:
                    _err(e, f"output '{e.id}' is write-only")
                _err(e, f"unknown identifier '{e.id}'")
            e.slot = b.slot
            return b.type
        if isinstance(e, ast.Field):
            base = self.expr(e.base)
            spec = self.schema.field(base.name, e.name)
            if spec is None:
                known = ", ".join(sorted(self.schema.types.get(base.name, {}))) or "none"
                _err(e, f"{base} has no field '{e.name}' (fields: {known})")
            return spec.type
        if isinstance(e, ast.Index):
            base = self.expr(e.base)
            if base.name != "array":
                _err(e, f"cannot index a value of type {base}")
            if self.expr(e.index) != INT:
                _err(e.index, f"array index must be int, not {e.index.ty}")
            return base.elem
        if isinstance(e, ast.Call):
            return self.call(e)
        if isinstance(e, ast.Def):
            self.expr(e.operand)
            return BOOL
        if isinstance(e, ast.Unary):
            ty = self.expr(e.operand)
            if e.op == "-":
                if not ty.numeric:
                    _err(e, f"unary '-' needs a number, not {ty}")
                return ty
            if ty != BOOL:
                _err(e, f"'!' needs a bool, not {ty}")
            return BOOL
        if isinstance(e, ast.Binary):
            return self.binary(e)
        _err(e, f"unsupported expression {type(e).__name__}")

    def binary(self, e: ast.Binary) -> Type:
        lt, rt = self.expr(e.left), self.expr(e.right)
        op = e.op
        if op in ("+", "-", "*", "/"):
            if not (lt.numeric and rt.numeric):
                _err(e, f"'{op}' needs numbers, got {lt} and {rt}")
            return INT if lt == rt == INT else FLOAT
        if op in ("&&", "||"):
            if lt != BOOL or rt != BOOL:
                _err(e, f"'{op}' needs bools, got {lt} and {rt}")
            return BOOL
        if lt.numeric and rt.numeric:
            return BOOL
        if lt == rt and lt in (STRING, BOOL):
            if lt == BOOL and op not in ("==", "!="):
                _err(e, f"'{op}' cannot order bool values")
            return BOOL
        _err(e, f"cannot compare {lt} with {rt}")

    def call(self, e: ast.Call) -> Type:
        if e.func not in BUILTINS:
            _err(e, f"unknown function '{e.func}'")
        params, result, load = BUILTINS[e.func]
        if len(e.args) != len(params):
            _err(e, f"{e.func} takes {len(params)} argument(s), got {len(e.args)}")
        for arg, want in zip(e.args, params):
            got = self.expr(arg)
            if want is None:
                if got.name != "array":
                    _err(arg, f"{e.func} needs an array, not {got}")
            elif got != want:
                _err(arg, f"{e.func} expects {want} here, not {got}")
        if load is not None:
            date = e.args[1]
            if isinstance(date, ast.Literal):
                try:
                    parse_date(date.value)
                except DateParseError as exc:
                    _err(date, str(exc))
            self.loads.add(load)
        self.builtins.add(e.func)
        return result


def typecheck(program: ast.Program, schema: Schema = DEFAULT_SCHEMA) -> TypedProgram:
    """Check a parsed program and return an annotated copy."""
    prog = copy.deepcopy(program)
    if not prog.statements:
        _err(prog, "empty program: expected an input declaration")
    checker = _Checker(schema)
    checker.program(prog)
    return TypedProgram(prog, dict(checker.outputs), checker.input_name,
                        frozenset(checker.loads), frozenset(checker.builtins),
                        checker.next_slot, schema.version)


def typecheck_expression(expr: ast.Expr, bindings: dict, schema: Schema = DEFAULT_SCHEMA):
    """Type an expression against named bindings; returns (annotated copy, slots)."""
    expr = copy.deepcopy(expr)
    checker = _Checker(schema)
    slots = {}
    for name, ty in bindings.items():
        slots[name] = checker.bind(expr, name, ty, "var")
    checker.expr(expr)
    return expr, slots, checker.next_slot


def check_source(source: str, schema: Schema = DEFAULT_SCHEMA) -> TypedProgram:
    from boat.lang.parser import parse
    return typecheck(parse(source), schema)
