from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = frozenset({
    "input", "output", "weight", "of", "visit", "visitor", "before", "foreach",
    "def", "true", "false", "if", "else",
})

# Longest operators first.
_OPERATORS = [
    (":=", "declare"), ("->", "arrow"), ("<<", "emit"), ("++", "incr"), ("--", "decr"),
    ("==", "eq"), ("!=", "ne"), ("<=", "le"), (">=", "ge"), ("&&", "and"), ("||", "or"),
    (":", "colon"), (";", "semicolon"), (",", "comma"), (".", "dot"),
    ("(", "lparen"), (")", "rparen"), ("[", "lbracket"), ("]", "rbracket"),
    ("{", "lbrace"), ("}", "rbrace"), ("=", "assign"), ("+", "plus"), ("-", "minus"),
    ("*", "star"), ("/", "slash"), ("<", "lt"), (">", "gt"), ("!", "not"),
]

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


class LexError(SyntaxError):
    def __init__(self, message: str, line: int, col: int):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    line: int
    col: int
    width: int = 0

    @property
    def end_col(self) -> int:
        return self.col + (self.width or len(self.lexeme))

    def __repr__(self) -> str:
        return f"Token({self.kind} {self.lexeme!r} @{self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    """Split source into tokens; ``#`` comments and whitespace are dropped.

    Lines and columns are 1-based. String tokens keep their decoded value as
    the lexeme.
    """
    tokens = []
    i, n = 0, len(source)
    line, line_start = 1, 0
    while i < n:
        c = source[i]
        col = i - line_start + 1
        if c == "\n":
            line += 1
            line_start = i + 1
            i += 1
        elif c in " \t\r":
            i += 1
        elif c == "#":
            while i < n and source[i] != "\n":
                i += 1
        elif c.isalpha() or c == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            i = j
        elif c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            kind = "int"
            if j + 1 < n and source[j] == "." and source[j + 1].isdigit():
                kind = "float"
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    kind = "float"
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(Token(kind, source[i:j], line, col))
            i = j
        elif c == '"':
            j = i + 1
            chars = []
            while True:
                if j >= n or source[j] == "\n":
                    raise LexError("unterminated string literal", line, col)
                ch = source[j]
                if ch == '"':
                    break
                if ch == "\\":
                    esc = source[j + 1] if j + 1 < n else ""
                    if esc not in _ESCAPES:
                        raise LexError(f"invalid escape '\\{esc}'", line, j - line_start + 1)
                    chars.append(_ESCAPES[esc])
                    j += 2
                    continue
                chars.append(ch)
                j += 1
            tokens.append(Token("string", "".join(chars), line, col, j + 1 - i))
            i = j + 1
        else:
            for op, kind in _OPERATORS:
                if source.startswith(op, i):
                    tokens.append(Token(kind, op, line, col))
                    i += len(op)
                    break
            else:
                raise LexError(f"unexpected character {c!r}", line, col)
    return tokens
