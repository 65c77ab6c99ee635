"""Recursive-descent parser for the expression language.

Grammar (lowest to highest binding)::

    sum     := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" sum ("," sum)* ")" | "(" sum ")"

``^`` is right-associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)`` and ``2^-x`` is ``2^(-x)``.
"""

from __future__ import annotations

import math
import re
from typing import Iterable, NamedTuple

from ..errors import ArityError, ExpressionSyntaxError, UnknownVariable
from .nodes import FUNCTIONS, BinOp, Call, Const, Expr, Neg, Var

NAMED_CONSTANTS = {"pi": math.pi}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[a-zA-Z_][a-zA-Z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


class Token(NamedTuple):
    kind: str  # "num", "name", "op", "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: frozenset[str] | None):
        self.text = text
        self.names = names
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, expected: str = "") -> ExpressionSyntaxError:
        return ExpressionSyntaxError(message, self.text, self.tok.pos, expected)

    def accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == op:
            self.i += 1
            return True
        return False

    def expect(self, op: str) -> None:
        if not self.accept(op):
            found = self.tok.text or "end of input"
            raise self.error(f"unexpected {found!r}", repr(op))

    def parse(self) -> Expr:
        node = self.sum()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}", "operator or end of input")
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if self.accept("("):
                return self.call(tok)
            return self.variable(tok)
        if self.accept("("):
            node = self.sum()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}", "number, name or '('")

    def call(self, name: Token) -> Expr:
        if name.text not in FUNCTIONS:
            raise ExpressionSyntaxError(f"unknown function {name.text!r}", self.text, name.pos, "one of " + ", ".join(FUNCTIONS))
        args = [self.sum()]
        while self.accept(","):
            args.append(self.sum())
        self.expect(")")
        want = FUNCTIONS[name.text]
        if len(args) != want:
            raise ArityError(name.text, len(args), want)
        return Call(name.text, tuple(args))

    def variable(self, tok: Token) -> Expr:
        if self.names is not None and tok.text in self.names:
            return Var(tok.text)
        if tok.text in NAMED_CONSTANTS:
            return Const(NAMED_CONSTANTS[tok.text])
        if self.names is None:
            return Var(tok.text)
        raise UnknownVariable(tok.text, tok.pos)


def parse_expression(text: str, ctx: Iterable[str] | None = None) -> Expr:
    """Parse ``text`` into an expression tree.

    ``ctx`` lists the admissible variable names; any other identifier raises
    :class:`UnknownVariable`. With ``ctx=None`` every identifier is accepted.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", text or "", 0, "an expression")
    names = None if ctx is None else frozenset(ctx)
    return _Parser(text, names).parse()
