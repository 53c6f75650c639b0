"""A deliberately plain reference interpreter for BoaT programs.

It walks the checked tree with dictionary scopes, visits counties one after
another in code order and records every emission in a list. Outputs are
computed from those lists at the end with textbook formulas: no frame
slots, no closures, no aggregator states and no merging.
"""
import math

from boat.aggregators import Row
from boat.domain import SpeedRoot, WeatherRoot, parse_date
from boat.lang import ast, check_source

ATTR = {"countyName": "name", "countyCode": "code", "grid": "grids", "weatherRoot": "weather_link",
        "speedRoot": "speed_link", "type": "vtype", "weatherRecords": "weather",
        "speedRecords": "speeds"}


class RefError(Exception):
    def __init__(self, message, node):
        self.line = node.line
        super().__init__(f"line {node.line}: {message}")


class Scope:
    def __init__(self, parent=None):
        self.vars, self.parent = {}, parent

    def find(self, name):
        s = self
        while name not in s.vars:
            s = s.parent
        return s

    def get(self, name):
        return self.find(name).vars[name]

    def set(self, name, value):
        self.find(name).vars[name] = value


def _tdiv(a, b):
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


class Reference:
    def __init__(self, source, dataset):
        self.typed = check_source(source)
        self.ds = dataset
        self.emitted = {name: [] for name in self.typed.outputs}
        self.decl_types = {}

    def run(self):
        prog = self.typed.program
        for county in sorted(self.ds.counties, key=lambda c: c.code):
            scope = Scope()
            scope.vars[self.typed.input_name] = county
            self.block(prog.statements[1:], scope)
        return {name: self.finalize(name) for name in sorted(self.emitted)}

    # statements
    def block(self, stmts, scope):
        inner = Scope(scope)
        for s in stmts:
            self.stmt(s, inner)

    def stmt(self, s, scope):
        if isinstance(s, ast.OutputDecl):
            return
        if isinstance(s, ast.VarDecl):
            scope.vars[s.name] = self.eval(s.value, scope)
            self.decl_types[id(s)] = s.value.ty
        elif isinstance(s, ast.Assign):
            old = scope.get(s.target.id)
            if s.op == "++":
                scope.set(s.target.id, None if old is None else old + 1)
            elif s.op == "--":
                scope.set(s.target.id, None if old is None else old - 1)
            else:
                v = self.eval(s.value, scope)
                if s.target.ty.name == "float" and isinstance(v, int) and not isinstance(v, bool):
                    v = float(v)
                scope.set(s.target.id, v)
        elif isinstance(s, ast.If):
            if self.eval(s.condition, scope):
                self.block(s.then, scope)
            elif s.orelse is not None:
                self.block(s.orelse, scope)
        elif isinstance(s, ast.ForEach):
            arr = self.loop_array(s.condition, s.var, scope)
            for i in range(len(arr)):
                inner = Scope(scope)
                inner.vars[s.var] = i
                if self.eval(s.condition, inner):
                    self.block(s.body, inner)
        elif isinstance(s, ast.Visit):
            node = self.eval(s.target, scope)
            clauses = {c.type_name: c for c in s.clauses}
            is_county = hasattr(node, "grids")
            if is_county and "County" in clauses:
                c = clauses["County"]
                inner = Scope(scope)
                inner.vars[c.var] = node
                self.block(c.body, inner)
            if "Grid" in clauses:
                c = clauses["Grid"]
                for g in (node.grids if is_county else (node,)):
                    inner = Scope(scope)
                    inner.vars[c.var] = g
                    self.block(c.body, inner)
        elif isinstance(s, ast.Emit):
            self.emit(s, scope)
        elif isinstance(s, ast.ExprStmt):
            self.eval(s.expr, scope)
        else:
            raise AssertionError(f"unhandled statement {s}")

    def loop_array(self, cond, var, scope):
        for node in ast.walk(cond):
            if isinstance(node, ast.Index) and isinstance(node.index, ast.Name) and node.index.id == var:
                return self.eval(node.base, scope)
        raise AssertionError("foreach condition indexes no array")

    def emit(self, s, scope):
        sig = self.typed.outputs[s.output]
        v = self.eval(s.value, scope)
        if v is None:
            return
        if isinstance(v, int) and (sig.kind in ("mean", "stdev") or sig.value_type.name == "float"):
            v = float(v)
        w = None
        if s.weight is not None:
            w = self.eval(s.weight, scope)
            if w is None:
                return
            if isinstance(w, int) and sig.weight_type.name == "float":
                w = float(w)
        key = self.eval(s.index, scope) if s.index is not None else None
        self.emitted[s.output].append((key, v, w))

    # expressions
    def eval(self, e, scope):
        if isinstance(e, ast.Literal):
            return e.value
        if isinstance(e, ast.Name):
            return scope.get(e.id)
        if isinstance(e, ast.Field):
            return getattr(self.eval(e.base, scope), ATTR.get(e.name, e.name))
        if isinstance(e, ast.Index):
            seq, i = self.eval(e.base, scope), self.eval(e.index, scope)
            if i is None or not 0 <= i < len(seq):
                raise IndexError(i)
            return seq[i]
        if isinstance(e, ast.Def):
            try:
                return self.eval(e.operand, scope) is not None
            except IndexError:
                return False
        if isinstance(e, ast.Call):
            args = [self.eval(a, scope) for a in e.args]
            if e.func == "len":
                return len(args[0])
            grid, day = args[0], parse_date(args[1])
            if e.func == "getweather":
                return WeatherRoot(self.ds.get_weather(grid.id, day) if grid.weather_link else [])
            return SpeedRoot(self.ds.get_speed(grid.id, day) if grid.speed_link else [])
        if isinstance(e, ast.Unary):
            v = self.eval(e.operand, scope)
            if e.op == "!":
                return not v
            return None if v is None else -v
        if isinstance(e, ast.Binary):
            if e.op == "&&":
                return bool(self.eval(e.left, scope)) and bool(self.eval(e.right, scope))
            if e.op == "||":
                return bool(self.eval(e.left, scope)) or bool(self.eval(e.right, scope))
            a, b = self.eval(e.left, scope), self.eval(e.right, scope)
            if e.op in ("+", "-", "*", "/"):
                if a is None or b is None:
                    return None
                if e.op == "+":
                    return a + b
                if e.op == "-":
                    return a - b
                if e.op == "*":
                    return a * b
                if b == 0:
                    raise RefError("division by zero", e)
                if e.left.ty.name == "int" and e.right.ty.name == "int":
                    return _tdiv(a, b)
                return a / b
            if a is None or b is None:
                return False
            return {"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b,
                    ">=": a >= b}[e.op]
        raise AssertionError(f"unhandled expression {e}")

    # outputs
    def finalize(self, name):
        sig = self.typed.outputs[name]
        groups = {}
        for key, v, w in self.emitted[name]:
            groups.setdefault(key, []).append((v, w))
        rows = []
        for key in sorted(groups, key=lambda k: "" if k is None else k):
            rows.extend(self.reduce(sig, key, groups[key]))
        return rows

    @staticmethod
    def reduce(sig, key, items):
        vals = [v for v, _ in items]
        n = sig.argument
        if sig.kind == "mean":
            return [Row(key, 0, math.fsum(vals) / len(vals))]
        if sig.kind == "stdev":
            m = math.fsum(vals) / len(vals)
            return [Row(key, 0, math.sqrt(math.fsum((x - m) ** 2 for x in vals) / len(vals)))]
        if sig.kind in ("maximum", "minimum"):
            pairs = [(v if w is None else w, v) for v, w in items]
            s = -1 if sig.kind == "maximum" else 1
            best = sorted(pairs, key=lambda t: (s * t[0], t[1]))[:n]
            return [Row(key, r, v, None if sig.weight_type is None else w)
                    for r, (w, v) in enumerate(best, 1)]
        if sig.kind == "top":
            acc = {}
            for v, w in items:
                acc.setdefault(v, []).append(1 if w is None else w)
            tot = {v: sum(ws) if all(isinstance(x, int) for x in ws) else math.fsum(ws)
                   for v, ws in acc.items()}
            best = sorted(tot.items(), key=lambda t: (-t[1], t[0]))[:n]
            return [Row(key, r, v, w) for r, (v, w) in enumerate(best, 1)]
        ordered = sorted(vals)
        return [Row(key, k, ordered[math.ceil(k * len(ordered) / n) - 1]) for k in range(1, n)]


def reference_run(source, dataset):
    return Reference(source, dataset).run()
