"""Front end for the BoaT query language: lexer, parser, printer, checker."""
from boat.lang.checker import OutputSig, TypeCheckError, TypedProgram, check_source, typecheck
from boat.lang.lexer import LexError, Token, tokenize
from boat.lang.parser import ParseError, parse
from boat.lang.printer import to_source

__all__ = [
    "LexError", "OutputSig", "ParseError", "Token", "TypeCheckError", "TypedProgram",
    "check_source", "parse", "to_source", "tokenize", "typecheck",
]
