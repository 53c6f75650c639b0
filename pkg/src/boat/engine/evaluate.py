"""Stand-alone expression evaluation against a dictionary of bindings."""
from __future__ import annotations

from typing import Union

from boat.domain import County, Grid, Location, SpeedRecord, SpeedRoot, WeatherRecord, WeatherRoot
from boat.engine.compiler import Compiler
from boat.engine.executor import EvaluationContext
from boat.lang import ast
from boat.lang.checker import typecheck_expression
from boat.lang.parser import parse_expression
from boat.lang.types import BOOL, DEFAULT_SCHEMA, FLOAT, INT, STRING, Type, array, domain

_DOMAIN_CLASSES = (County, Grid, Location, WeatherRoot, SpeedRoot, WeatherRecord, SpeedRecord)


def infer_type(value) -> Type:
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, float):
        return FLOAT
    if isinstance(value, str):
        return STRING
    for cls in _DOMAIN_CLASSES:
        if isinstance(value, cls):
            return domain(cls.__name__)
    if isinstance(value, (list, tuple)) and value:
        return array(infer_type(value[0]))
    raise TypeError(f"cannot infer a language type for {type(value).__name__}")


def evaluate(expr: Union[str, ast.Expr], ctx: EvaluationContext):
    """Type-check ``expr`` against ``ctx.env`` and evaluate it.

    >>> evaluate("7 / 2", EvaluationContext())
    3
    """
    if isinstance(expr, str):
        expr = parse_expression(expr)
    env = dict(ctx.env)
    if ctx.county is not None:
        env.setdefault("county", ctx.county)
    types = {name: infer_type(v) for name, v in env.items()}
    typed, slots, size = typecheck_expression(expr, types, DEFAULT_SCHEMA)
    frame = [None] * size
    for name, slot in slots.items():
        frame[slot] = env[name]
    return Compiler(DEFAULT_SCHEMA, ctx.dataset).expr(typed)(frame)
