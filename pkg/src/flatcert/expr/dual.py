"""Tagged dual numbers for nested forward-mode differentiation.

A :class:`Dual` carries a primal part ``a`` and a tangent ``b`` for one
perturbation, identified by ``tag``. Parts may themselves be duals of an
*older* (smaller) tag, which is how second derivatives are obtained: a new
perturbation is always created with a fresh, larger tag, so the outermost
wrapper of a value is its most recent perturbation. Operations between
values of different tags treat the lower-tagged operand as a constant with
respect to the higher tag.

The module-level functions (:func:`add`, :func:`sin`, ...) accept floats and
duals alike and raise :class:`~flatcert.errors.DomainError` instead of
returning NaN or infinity.
"""

from __future__ import annotations

import itertools
import math

from ..errors import DomainError

_tags = itertools.count(1)


def new_tag() -> int:
    return next(_tags)


class Dual:
    __slots__ = ("a", "b", "tag")

    def __init__(self, a, b, tag: int):
        self.a = a
        self.b = b
        self.tag = tag

    def __repr__(self) -> str:
        return f"Dual({self.a!r}, {self.b!r}, tag={self.tag})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, o):
        return power(self, o)

    def __rpow__(self, o):
        return power(o, self)


def primal(v) -> float:
    """The innermost float of a (possibly nested) dual."""
    while isinstance(v, Dual):
        v = v.a
    return v


def tangent(v, tag: int):
    """Tangent of ``v`` along perturbation ``tag`` (0.0 if independent)."""
    if isinstance(v, Dual):
        if v.tag == tag:
            return v.b
        if v.tag > tag:
            # newer perturbation wraps this one; strip it componentwise
            return _make(tangent(v.a, tag), tangent(v.b, tag), v.tag)
    return 0.0


def strip(v, tag: int):
    """Primal part of ``v`` with respect to perturbation ``tag``."""
    if isinstance(v, Dual):
        if v.tag == tag:
            return v.a
        if v.tag > tag:
            return _make(strip(v.a, tag), strip(v.b, tag), v.tag)
    return v


def _make(a, b, tag):
    # a zero tangent means no dependence on ``tag``; drop the wrapper
    if _zero(b):
        return a
    return Dual(a, b, tag)


def _zero(v) -> bool:
    return not isinstance(v, Dual) and v == 0.0


def _top(x, y):
    tx = x.tag if isinstance(x, Dual) else 0
    ty = y.tag if isinstance(y, Dual) else 0
    return tx if tx >= ty else ty


def _parts(v, tag):
    if isinstance(v, Dual) and v.tag == tag:
        return v.a, v.b
    return v, 0.0


def _checked(value: float) -> float:
    if not math.isfinite(value):
        raise DomainError("non-finite intermediate value")
    return value


# -- arithmetic --------------------------------------------------------------


def add(x, y):
    t = _top(x, y)
    if t == 0:
        return _checked(x + y)
    xa, xb = _parts(x, t)
    ya, yb = _parts(y, t)
    if _zero(xb):
        b = yb
    elif _zero(yb):
        b = xb
    else:
        b = add(xb, yb)
    return Dual(add(xa, ya), b, t)


def neg(x):
    if isinstance(x, Dual):
        return Dual(neg(x.a), neg(x.b), x.tag)
    return -x


def sub(x, y):
    return add(x, neg(y))


def mul(x, y):
    t = _top(x, y)
    if t == 0:
        return _checked(x * y)
    xa, xb = _parts(x, t)
    ya, yb = _parts(y, t)
    if _zero(xb):
        b = 0.0 if _zero(yb) else mul(xa, yb)
    elif _zero(yb):
        b = mul(xb, ya)
    else:
        b = add(mul(xb, ya), mul(xa, yb))
    return Dual(mul(xa, ya), b, t)


def div(x, y):
    t = _top(x, y)
    if t == 0:
        if y == 0.0:
            raise DomainError("division by zero")
        return _checked(x / y)
    xa, xb = _parts(x, t)
    ya, yb = _parts(y, t)
    q = div(xa, ya)
    if _zero(yb):
        b = 0.0 if _zero(xb) else div(xb, ya)
    else:
        b = div(sub(xb, mul(q, yb)), ya)
    return Dual(q, b, t)


def _is_integer(v) -> bool:
    return float(v).is_integer()


def power(x, y):
    """``x ** y``; constant exponents allow negative bases when integral."""
    t = _top(x, y)
    if t == 0:
        if x < 0.0 and not _is_integer(y):
            raise DomainError("negative base with non-integer exponent")
        if x == 0.0 and y < 0.0:
            raise DomainError("zero to a negative power")
        try:
            return _checked(math.pow(x, y))
        except OverflowError:
            raise DomainError("overflow in power") from None
    xa, xb = _parts(x, t)
    ya, yb = _parts(y, t)
    val = power(xa, ya)
    if _zero(yb):
        if _zero(xb):
            return Dual(val, 0.0, t)
        # d(x^c) = c x^(c-1) dx
        return Dual(val, mul(mul(ya, power(xa, sub(ya, 1.0))), xb), t)
    if primal(xa) <= 0.0:
        raise DomainError("non-positive base with variable exponent")
    lx = ln(xa)
    b = mul(yb, lx)
    if not _zero(xb):
        b = add(b, div(mul(ya, xb), xa))
    return Dual(val, mul(val, b), t)


# -- elementary functions ----------------------------------------------------


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.a), mul(cos(x.a), x.b), x.tag)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.a), neg(mul(sin(x.a), x.b)), x.tag)
    return math.cos(x)


def tan(x):
    if isinstance(x, Dual):
        v = tan(x.a)
        return Dual(v, mul(add(1.0, mul(v, v)), x.b), x.tag)
    if math.cos(x) == 0.0:
        raise DomainError("tan at a pole")
    return _checked(math.tan(x))


def atan(x):
    if isinstance(x, Dual):
        return Dual(atan(x.a), div(x.b, add(1.0, mul(x.a, x.a))), x.tag)
    return math.atan(x)


def atan2(y, x):
    """Angle of the point (x, y); undefined (DomainError) at the origin."""
    t = _top(y, x)
    if t == 0:
        if y == 0.0 and x == 0.0:
            raise DomainError("atan2(0, 0)")
        return math.atan2(y, x)
    ya, yb = _parts(y, t)
    xa, xb = _parts(x, t)
    val = atan2(ya, xa)
    num = sub(mul(xa, yb), mul(ya, xb))
    return Dual(val, div(num, add(mul(xa, xa), mul(ya, ya))), t)


def exp(x):
    if isinstance(x, Dual):
        v = exp(x.a)
        return Dual(v, mul(v, x.b), x.tag)
    try:
        return _checked(math.exp(x))
    except OverflowError:
        raise DomainError("overflow in exp") from None


def ln(x):
    if isinstance(x, Dual):
        return Dual(ln(x.a), div(x.b, x.a), x.tag)
    if x <= 0.0:
        raise DomainError("ln of non-positive value")
    return math.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = sqrt(x.a)
        if _zero(x.b):
            return Dual(v, 0.0, x.tag)
        return Dual(v, div(x.b, mul(2.0, v)), x.tag)
    if x < 0.0:
        raise DomainError("sqrt of negative value")
    return math.sqrt(x)


UNARY = {"sin": sin, "cos": cos, "tan": tan, "atan": atan, "exp": exp, "ln": ln, "sqrt": sqrt}
BINARY = {"+": add, "-": sub, "*": mul, "/": div, "^": power, "atan2": atan2, "pow": power}
