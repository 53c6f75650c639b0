"""Canonical pretty-printer; ``parse(to_source(p)) == p`` for every tree."""
from __future__ import annotations

from boat.lang import ast

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
         "+": 4, "-": 4, "*": 5, "/": 5}
_UNARY_PREC = 6
_ESC = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


def _literal(node: ast.Literal) -> str:
    if node.kind == "bool":
        return "true" if node.value else "false"
    if node.kind == "string":
        return '"' + "".join(_ESC.get(c, c) for c in node.value) + '"'
    if node.kind == "float":
        text = repr(node.value)
        return text if any(c in text for c in ".eE") else text + ".0"
    return str(node.value)


def _prec(e: ast.Expr) -> int:
    if isinstance(e, ast.Binary):
        return _PREC[e.op]
    if isinstance(e, ast.Unary):
        return _UNARY_PREC
    if isinstance(e, ast.Literal) and e.kind in ("int", "float") and e.value < 0:
        return _UNARY_PREC
    return 7


def expr_source(e: ast.Expr) -> str:
    if isinstance(e, ast.Literal):
        return _literal(e)
    if isinstance(e, ast.Name):
        return e.id
    if isinstance(e, ast.Field):
        return f"{_wrap(e.base, 7)}.{e.name}"
    if isinstance(e, ast.Index):
        return f"{_wrap(e.base, 7)}[{expr_source(e.index)}]"
    if isinstance(e, ast.Call):
        return f"{e.func}({', '.join(expr_source(a) for a in e.args)})"
    if isinstance(e, ast.Def):
        return f"def({expr_source(e.operand)})"
    if isinstance(e, ast.Unary):
        inner = _wrap(e.operand, _UNARY_PREC)
        if e.op == "-" and inner.startswith("-"):
            inner = f"({inner})"
        return e.op + inner
    if isinstance(e, ast.Binary):
        p = _PREC[e.op]
        # Comparisons do not chain; everything else is left-associative.
        left_min = p + 1 if p == 3 else p
        return f"{_wrap(e.left, left_min)} {e.op} {_wrap(e.right, p + 1)}"
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e: ast.Expr, minimum: int) -> str:
    text = expr_source(e)
    return f"({text})" if _prec(e) < minimum else text


def _body(stmts, depth: int) -> list[str]:
    lines = []
    for s in stmts:
        lines.extend(_stmt(s, depth))
    return lines


def _stmt(s: ast.Stmt, depth: int) -> list[str]:
    pad = "    " * depth
    if isinstance(s, ast.InputDecl):
        return [f"{pad}{s.name}: {s.type_name} = input;"]
    if isinstance(s, ast.OutputDecl):
        text = f"{pad}{s.name}: output {s.aggregator}"
        if s.argument is not None:
            text += f"({s.argument})"
        if s.index_type is not None:
            text += f"[{s.index_type}]"
        text += f" of {s.value_type}"
        if s.weight_type is not None:
            text += f" weight {s.weight_type}"
        return [text + ";"]
    if isinstance(s, ast.VarDecl):
        return [f"{pad}{s.name} := {expr_source(s.value)};"]
    if isinstance(s, ast.Assign):
        if s.op == "=":
            return [f"{pad}{s.target.id} = {expr_source(s.value)};"]
        return [f"{pad}{s.target.id}{s.op};"]
    if isinstance(s, ast.Emit):
        text = pad + s.output
        if s.index is not None:
            text += f"[{expr_source(s.index)}]"
        text += f" << {expr_source(s.value)}"
        if s.weight is not None:
            text += f" weight {expr_source(s.weight)}"
        return [text + ";"]
    if isinstance(s, ast.ExprStmt):
        return [f"{pad}{expr_source(s.expr)};"]
    if isinstance(s, ast.ForEach):
        head = f"{pad}foreach ({s.var} : {s.type_name}; {expr_source(s.condition)}) {{"
        return [head, *_body(s.body, depth + 1), pad + "}"]
    if isinstance(s, ast.If):
        lines = [f"{pad}if ({expr_source(s.condition)}) {{", *_body(s.then, depth + 1)]
        if s.orelse is None:
            return lines + [pad + "}"]
        return lines + [pad + "} else {", *_body(s.orelse, depth + 1), pad + "}"]
    if isinstance(s, ast.Visit):
        lines = [f"{pad}visit({expr_source(s.target)}, visitor {{"]
        for c in s.clauses:
            lines.append(f"{pad}    before {c.var} : {c.type_name} -> {{")
            lines.extend(_body(c.body, depth + 2))
            lines.append(pad + "    }")
        return lines + [pad + "});"]
    raise TypeError(f"not a statement: {s!r}")


def to_source(program: ast.Program) -> str:
    return "\n".join(_body(program.statements, 0)) + "\n"
