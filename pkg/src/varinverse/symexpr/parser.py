"""Recursive-descent parser for the expression grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('-')? base ('^' exponent)?
    base   := number | ident | func '(' expr ')' | '(' expr ')'

An exponent is a signed decimal constant, optionally parenthesised, and may
be a ratio of two integers inside the parentheses, e.g. ``x^(1/2)``.
"""
from __future__ import annotations

import re
from fractions import Fraction

from .core import FUNCTIONS, Expr, Num, Sym, add, func, mul, neg, power
from .env import SymbolEnv

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownSymbolError(ValueError):
    def __init__(self, name: str, offset: int = -1):
        super().__init__(f"unknown symbol {name!r}")
        self.name = name
        self.offset = offset


def _tokenize(text: str):
    data = text.encode("utf-8")
    tokens = []
    pos = 0
    # offsets are byte offsets into the UTF-8 encoding
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode("utf-8")))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), len(text[:pos].encode("utf-8"))))
        pos = m.end()
    tokens.append(("end", "", len(data)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value or kind == "end":
            raise ParseError(f"expected {value!r}", off)

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = add(left, right) if op == "+" else add(left, neg(right))
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.factor()
            left = mul(left, right) if op == "*" else mul(left, power(right, -1))
        return left

    def factor(self) -> Expr:
        negate = False
        if self.peek()[:2] == ("op", "-"):
            self.take()
            negate = True
        b = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            b = power(b, self.exponent())
        return neg(b) if negate else b

    def _signed_number(self) -> Fraction:
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.take()
            sign = -1
        kind, text, off = self.take()
        if kind != "number":
            raise ParseError("exponent must be a rational constant", off)
        return sign * Fraction(text)

    def exponent(self) -> Fraction:
        if self.peek()[:2] == ("op", "("):
            self.take()
            k = self._signed_number()
            if self.peek()[:2] == ("op", "/"):
                self.take()
                kind, text, off = self.take()
                if kind != "number":
                    raise ParseError("exponent must be a rational constant", off)
                d = Fraction(text)
                if d == 0:
                    raise ParseError("zero denominator in exponent", off)
                k = k / d
            self.expect(")")
            return k
        return self._signed_number()

    def base(self) -> Expr:
        kind, text, off = self.take()
        if kind == "number":
            return Num(Fraction(text))
        if kind == "ident":
            if text in FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    raise ParseError(f"expected '(' after {text}", self.peek()[2])
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            if self.allowed is not None and text not in self.allowed:
                raise UnknownSymbolError(text, off)
            return Sym(text)
        if (kind, text) == ("op", "("):
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {text!r}", off)


def parse(text: str, env: SymbolEnv | None = None, extra=()) -> Expr:
    """Parse ``text``; every identifier must be declared in ``env``
    (or listed in ``extra``). With ``env=None`` any identifier is accepted."""
    allowed = None if env is None else env.symbols() | frozenset(extra)
    p = _Parser(text, allowed)
    e = p.expr()
    kind, tok, off = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {tok!r}", off)
    return e
