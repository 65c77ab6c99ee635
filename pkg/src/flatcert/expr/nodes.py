"""Immutable expression trees and their infix rendering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

# function tag -> arity
FUNCTIONS: dict[str, int] = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "atan": 1,
    "exp": 1,
    "ln": 1,
    "sqrt": 1,
    "atan2": 2,
    "pow": 2,
}

BINARY_OPS = ("+", "-", "*", "/", "^")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Const, Var, Neg, BinOp, Call]

# binding strength used by the renderer; mirrors the parser
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _ATOM


def _wrap(text: str, cond: bool) -> str:
    return f"({text})" if cond else text


def render(node: Expr) -> str:
    """Infix text for ``node`` using the minimum parentheses that re-parse to it."""
    if isinstance(node, Const):
        value = float(node.value)
        text = str(int(value)) if value.is_integer() and abs(value) < 1e15 else repr(value)
        # negative literals do not exist in the grammar
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(render(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = node.arg
        # -(a+b), -(a*b) need parens; -(x^2) renders as -x^2; --x is fine
        return "-" + _wrap(render(inner), _prec(inner) < _PREC["neg"])
    p = _PREC[node.op]
    if node.op == "^":
        # right associative: base needs parens at equal or lower precedence
        left = _wrap(render(node.left), _prec(node.left) <= p)
        right = _wrap(render(node.right), _prec(node.right) < p and not isinstance(node.right, Neg))
        return f"{left}^{right}"
    left = _wrap(render(node.left), _prec(node.left) < p)
    right = _wrap(render(node.right), _prec(node.right) <= p)
    return f"{left} {node.op} {right}"


def walk(node: Expr) -> Iterator[Expr]:
    yield node
    if isinstance(node, Neg):
        yield from walk(node.arg)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Call):
        for a in node.args:
            yield from walk(a)


def variables(node: Expr) -> set[str]:
    return {n.name for n in walk(node) if isinstance(n, Var)}
