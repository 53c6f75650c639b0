"""Syntax tree for BoaT programs.

Source positions and checker annotations are excluded from equality, so two
trees compare equal iff they are structurally identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class Node:
    line: int = field(default=0, compare=False, kw_only=True)
    col: int = field(default=0, compare=False, kw_only=True)


@dataclass
class Expr(Node):
    ty: Any = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass
class Literal(Expr):
    value: Any
    kind: str  # int | float | string | bool


@dataclass
class Name(Expr):
    id: str
    slot: int = field(default=-1, compare=False, repr=False, kw_only=True)


@dataclass
class Field(Expr):
    base: Expr
    name: str


@dataclass
class Index(Expr):
    base: Expr
    index: Expr


@dataclass
class Call(Expr):
    func: str
    args: list[Expr]


@dataclass
class Def(Expr):
    operand: Expr


@dataclass
class Unary(Expr):
    op: str  # - or !
    operand: Expr


@dataclass
class Binary(Expr):
    op: str  # + - * / == != < <= > >= && ||
    left: Expr
    right: Expr


@dataclass
class Stmt(Node):
    pass


@dataclass
class InputDecl(Stmt):
    name: str
    type_name: str
    slot: int = field(default=-1, compare=False, repr=False, kw_only=True)


@dataclass
class OutputDecl(Stmt):
    name: str
    aggregator: str
    argument: Optional[int]
    index_type: Optional[str]
    value_type: str
    weight_type: Optional[str]


@dataclass
class VarDecl(Stmt):
    name: str
    value: Expr
    slot: int = field(default=-1, compare=False, repr=False, kw_only=True)


@dataclass
class Assign(Stmt):
    target: Name
    op: str  # = ++ --
    value: Optional[Expr]


@dataclass
class ForEach(Stmt):
    var: str
    type_name: str
    condition: Expr
    body: list[Stmt]
    slot: int = field(default=-1, compare=False, repr=False, kw_only=True)
    # Array scanned by the loop, and whether the condition is a bare def(arr[i]).
    domain: Optional[Expr] = field(default=None, compare=False, repr=False, kw_only=True)
    trivial: bool = field(default=False, compare=False, repr=False, kw_only=True)


@dataclass
class BeforeClause(Node):
    var: str
    type_name: str
    body: list[Stmt]
    slot: int = field(default=-1, compare=False, repr=False, kw_only=True)


@dataclass
class Visit(Stmt):
    target: Expr
    clauses: list[BeforeClause]


@dataclass
class Emit(Stmt):
    output: str
    index: Optional[Expr]
    value: Expr
    weight: Optional[Expr]


@dataclass
class If(Stmt):
    condition: Expr
    then: list[Stmt]
    orelse: Optional[list[Stmt]]


@dataclass
class ExprStmt(Stmt):
    expr: Expr


@dataclass
class Program(Node):
    statements: list[Stmt]


def walk(node):
    """Yield every node of a tree, parents before children."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        children = []
        for name in cur.__dataclass_fields__:
            if name in ("ty", "domain"):
                continue
            v = getattr(cur, name)
            if isinstance(v, Node):
                children.append(v)
            elif isinstance(v, list):
                children.extend(x for x in v if isinstance(x, Node))
        stack.extend(reversed(children))
