"""Recursive-descent parser for map expressions.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*`` and ``/``; binary operators are left-associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' INTEGER)*
    atom   := NUMBER ['i'] | 'i' | 'z' | '(' expr ')'
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError
from .ast import Add, Const, Div, IntPow, Mul, Neg, Node, Sub, Var, fold

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


@dataclass(frozen=True)
class Token:
    kind: str      # "num", "int", "name", "op", "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    toks = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "num" and value.isdigit():
            kind = "int"
        toks.append(Token(kind, value, start))
        pos = m.end()
    toks.append(Token("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        if self.tok.kind != "op" or self.tok.text != op:
            raise ParseError(f"expected {op!r}", self.tok.pos, [op])
        self.advance()

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            if self.tok.kind != "int":
                raise ParseError("exponent must be a non-negative integer literal",
                                 self.tok.pos, ["integer"])
            node = IntPow(node, int(self.advance().text))
        return node

    def atom(self) -> Node:
        t = self.tok
        if t.kind in ("num", "int"):
            self.advance()
            value = float(t.text)
            if self.tok.kind == "name" and self.tok.text == "i" and self.tok.pos == t.pos + len(t.text):
                self.advance()
                return Const(complex(0.0, value))
            return Const(complex(value, 0.0))
        if t.kind == "name":
            if t.text == "z":
                self.advance()
                return Var()
            if t.text == "i":
                self.advance()
                return Const(1j)
            raise ParseError(f"unknown identifier {t.text!r}", t.pos, ["z", "i"])
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError("unexpected end of input" if t.kind == "end" else f"unexpected {t.text!r}",
                         t.pos, ["number", "z", "i", "(", "-"])


def parse_map(text: str) -> Node:
    """Parse ``text`` into a constant-folded expression tree."""
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "end":
        raise ParseError(f"unexpected {p.tok.text!r}", p.tok.pos, ["+", "-", "*", "/", "^", "end"])
    return fold(node)
