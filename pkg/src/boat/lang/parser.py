"""Recursive-descent parser producing :mod:`boat.lang.ast` trees."""
from __future__ import annotations

from typing import Optional

from boat.lang import ast
from boat.lang.lexer import Token, tokenize

_DESCRIBE = {
    "semicolon": "';'", "colon": "':'", "comma": "','", "dot": "'.'", "lparen": "'('",
    "rparen": "')'", "lbracket": "'['", "rbracket": "']'", "lbrace": "'{'", "rbrace": "'}'",
    "arrow": "'->'", "declare": "':='", "assign": "'='", "emit": "'<<'", "eof": "end of input",
}

_COMPARISONS = {"eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}


class ParseError(SyntaxError):
    def __init__(self, message: str, line: int, col: int, expected: frozenset = frozenset()):
        self.line, self.col, self.expected = line, col, expected
        super().__init__(f"line {line}, column {col}: {message}")


def _describe(kind: str) -> str:
    return _DESCRIBE.get(kind, kind)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = list(tokens)
        last = self.toks[-1] if self.toks else None
        eof_line = last.line if last else 1
        eof_col = last.end_col if last else 1
        self.toks.append(Token("eof", "", eof_line, eof_col))
        self.pos = 0

    # -- token helpers -------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, kind: str, lexeme: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (lexeme is None or t.lexeme == lexeme)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, expected: set, tok: Optional[Token] = None):
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else f"{t.kind} {t.lexeme!r}"
        wanted = " or ".join(sorted(_describe(e) for e in expected))
        line, col = t.line, t.col
        # A missing terminator belongs to the line it should have closed.
        if expected & {"semicolon"} and self.pos > 0:
            prev = self.toks[self.pos - 1]
            line, col = prev.line, prev.end_col
        raise ParseError(f"expected {wanted} but found {found}", line, col, frozenset(expected))

    def expect(self, kind: str, lexeme: Optional[str] = None) -> Token:
        if not self.at(kind, lexeme):
            self.error({lexeme if lexeme else kind})
        return self.advance()

    def expect_ident(self) -> Token:
        return self.expect("ident")

    # -- statements ----------------------------------------------------
    def program(self) -> ast.Program:
        stmts = []
        while not self.at("eof"):
            stmts.append(self.statement())
        return ast.Program(stmts, line=1, col=1)

    def body(self) -> list[ast.Stmt]:
        if self.at("lbrace"):
            self.advance()
            stmts = []
            while not self.at("rbrace"):
                if self.at("eof"):
                    self.error({"rbrace"})
                stmts.append(self.statement())
            self.advance()
            return stmts
        return [self.statement()]

    def statement(self) -> ast.Stmt:
        t = self.tok
        if t.kind == "kw":
            if t.lexeme == "foreach":
                return self.foreach()
            if t.lexeme == "visit":
                return self.visit()
            if t.lexeme == "if":
                return self.if_stmt()
            if t.lexeme not in ("def", "true", "false"):
                self.error({"statement"})
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "colon":
                return self.declaration()
            if nxt.kind == "declare":
                self.advance()
                self.advance()
                value = self.expression()
                self.expect("semicolon")
                return ast.VarDecl(t.lexeme, value, line=t.line, col=t.col)
            if nxt.kind == "emit":
                self.advance()
                return self.emit_rest(t, None)
            if nxt.kind == "lbracket":
                saved = self.pos
                self.advance()
                self.advance()
                index = self.expression()
                if self.at("rbracket") and self.peek().kind == "emit":
                    self.advance()
                    return self.emit_rest(t, index)
                self.pos = saved
            if nxt.kind in ("assign", "incr", "decr"):
                self.advance()
                op = self.advance()
                target = ast.Name(t.lexeme, line=t.line, col=t.col)
                if op.kind == "assign":
                    value = self.expression()
                    self.expect("semicolon")
                    return ast.Assign(target, "=", value, line=t.line, col=t.col)
                self.expect("semicolon")
                return ast.Assign(target, op.lexeme, None, line=t.line, col=t.col)
        if t.kind in ("rbrace", "rparen", "rbracket", "semicolon", "eof") or t.kind not in (
                "ident", "int", "float", "string", "kw", "lparen", "minus", "not"):
            self.error({"statement"})
        expr = self.expression()
        self.expect("semicolon")
        return ast.ExprStmt(expr, line=t.line, col=t.col)

    def emit_rest(self, name_tok: Token, index: Optional[ast.Expr]) -> ast.Emit:
        self.expect("emit")
        value = self.expression()
        weight = None
        if self.at("kw", "weight"):
            self.advance()
            weight = self.expression()
        self.expect("semicolon")
        return ast.Emit(name_tok.lexeme, index, value, weight, line=name_tok.line, col=name_tok.col)

    def declaration(self) -> ast.Stmt:
        name = self.advance()
        self.expect("colon")
        if self.at("kw", "output"):
            self.advance()
            agg = self.expect_ident().lexeme
            argument = None
            if self.at("lparen"):
                self.advance()
                argument = int(self.expect("int").lexeme)
                self.expect("rparen")
            index_type = None
            if self.at("lbracket"):
                self.advance()
                index_type = self.expect_ident().lexeme
                self.expect("rbracket")
            if not self.at("kw", "of"):
                self.error({"of", "lparen", "lbracket"} if argument is None and index_type is None
                           else {"of"})
            self.advance()
            value_type = self.expect_ident().lexeme
            weight_type = None
            if self.at("kw", "weight"):
                self.advance()
                weight_type = self.expect_ident().lexeme
            self.expect("semicolon")
            return ast.OutputDecl(name.lexeme, agg, argument, index_type, value_type, weight_type,
                                  line=name.line, col=name.col)
        if not self.at("ident"):
            self.error({"output", "ident"})
        type_name = self.advance().lexeme
        self.expect("assign")
        self.expect("kw", "input")
        self.expect("semicolon")
        return ast.InputDecl(name.lexeme, type_name, line=name.line, col=name.col)

    def foreach(self) -> ast.ForEach:
        kw = self.advance()
        self.expect("lparen")
        var = self.expect_ident().lexeme
        self.expect("colon")
        type_name = self.expect_ident().lexeme
        self.expect("semicolon")
        cond = self.expression()
        self.expect("rparen")
        body = self.body()
        return ast.ForEach(var, type_name, cond, body, line=kw.line, col=kw.col)

    def visit(self) -> ast.Visit:
        kw = self.advance()
        self.expect("lparen")
        target = self.expression()
        self.expect("comma")
        self.expect("kw", "visitor")
        self.expect("lbrace")
        clauses = []
        while self.at("kw", "before"):
            b = self.advance()
            var = self.expect_ident().lexeme
            self.expect("colon")
            type_name = self.expect_ident().lexeme
            self.expect("arrow")
            body = self.body()
            clauses.append(ast.BeforeClause(var, type_name, body, line=b.line, col=b.col))
            if self.at("semicolon"):
                self.advance()
        if not self.at("rbrace"):
            self.error({"before", "rbrace"})
        self.advance()
        self.expect("rparen")
        self.expect("semicolon")
        return ast.Visit(target, clauses, line=kw.line, col=kw.col)

    def if_stmt(self) -> ast.If:
        kw = self.advance()
        self.expect("lparen")
        cond = self.expression()
        self.expect("rparen")
        then = self.body()
        orelse = None
        if self.at("kw", "else"):
            self.advance()
            orelse = self.body()
        return ast.If(cond, then, orelse, line=kw.line, col=kw.col)

    # -- expressions ---------------------------------------------------
    def expression(self) -> ast.Expr:
        return self.logic_or()

    def logic_or(self) -> ast.Expr:
        left = self.logic_and()
        while self.at("or"):
            op = self.advance()
            left = ast.Binary("||", left, self.logic_and(), line=op.line, col=op.col)
        return left

    def logic_and(self) -> ast.Expr:
        left = self.comparison()
        while self.at("and"):
            op = self.advance()
            left = ast.Binary("&&", left, self.comparison(), line=op.line, col=op.col)
        return left

    def comparison(self) -> ast.Expr:
        left = self.additive()
        if self.tok.kind in _COMPARISONS:
            op = self.advance()
            left = ast.Binary(_COMPARISONS[op.kind], left, self.additive(), line=op.line, col=op.col)
        return left

    def additive(self) -> ast.Expr:
        left = self.multiplicative()
        while self.tok.kind in ("plus", "minus"):
            op = self.advance()
            left = ast.Binary(op.lexeme, left, self.multiplicative(), line=op.line, col=op.col)
        return left

    def multiplicative(self) -> ast.Expr:
        left = self.unary()
        while self.tok.kind in ("star", "slash"):
            op = self.advance()
            left = ast.Binary(op.lexeme, left, self.unary(), line=op.line, col=op.col)
        return left

    def unary(self) -> ast.Expr:
        if self.tok.kind in ("minus", "not"):
            op = self.advance()
            return ast.Unary(op.lexeme, self.unary(), line=op.line, col=op.col)
        return self.postfix()

    def postfix(self) -> ast.Expr:
        expr = self.primary()
        while True:
            if self.at("dot"):
                d = self.advance()
                expr = ast.Field(expr, self.expect_ident().lexeme, line=d.line, col=d.col)
            elif self.at("lbracket"):
                b = self.advance()
                index = self.expression()
                self.expect("rbracket")
                expr = ast.Index(expr, index, line=b.line, col=b.col)
            else:
                return expr

    def primary(self) -> ast.Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return ast.Literal(int(t.lexeme), "int", line=t.line, col=t.col)
        if t.kind == "float":
            self.advance()
            return ast.Literal(float(t.lexeme), "float", line=t.line, col=t.col)
        if t.kind == "string":
            self.advance()
            return ast.Literal(t.lexeme, "string", line=t.line, col=t.col)
        if t.kind == "kw" and t.lexeme in ("true", "false"):
            self.advance()
            return ast.Literal(t.lexeme == "true", "bool", line=t.line, col=t.col)
        if t.kind == "kw" and t.lexeme == "def":
            self.advance()
            self.expect("lparen")
            operand = self.expression()
            self.expect("rparen")
            return ast.Def(operand, line=t.line, col=t.col)
        if t.kind == "ident":
            self.advance()
            if self.at("lparen"):
                self.advance()
                args = []
                if not self.at("rparen"):
                    args.append(self.expression())
                    while self.at("comma"):
                        self.advance()
                        args.append(self.expression())
                self.expect("rparen")
                return ast.Call(t.lexeme, args, line=t.line, col=t.col)
            return ast.Name(t.lexeme, line=t.line, col=t.col)
        if t.kind == "lparen":
            self.advance()
            inner = self.expression()
            self.expect("rparen")
            return inner
        self.error({"expression"})


def parse_expression(source: str) -> ast.Expr:
    p = _Parser(tokenize(source))
    expr = p.expression()
    if not p.at("eof"):
        p.error({"eof"})
    return expr


def parse(source_or_tokens) -> ast.Program:
    """Parse source text (or a token list from :func:`tokenize`)."""
    tokens = tokenize(source_or_tokens) if isinstance(source_or_tokens, str) else source_or_tokens
    return _Parser(tokens).program()
