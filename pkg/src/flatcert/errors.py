"""Exception hierarchy shared by every flatcert module."""

from __future__ import annotations


class FlatcertError(Exception):
    """Base class for all errors raised by flatcert."""


# -- expressions -------------------------------------------------------------


class ExpressionSyntaxError(FlatcertError, ValueError):
    """Malformed expression text.

    ``position`` is the 0-based character offset of the offending token and
    ``expected`` a short description of what the parser wanted there.
    """

    def __init__(self, message: str, text: str = "", position: int = 0, expected: str = ""):
        self.text = text
        self.position = position
        self.expected = expected
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownVariable(FlatcertError, ValueError):
    def __init__(self, name: str, position: int = 0):
        self.name = name
        self.position = position
        super().__init__(f"unknown variable {name!r} at position {position}")


class ArityError(FlatcertError, ValueError):
    def __init__(self, func: str, got: int, want: int):
        self.func = func
        self.got = got
        self.want = want
        super().__init__(f"{func}() takes {want} argument(s), got {got}")


class DomainError(FlatcertError, ArithmeticError):
    """Evaluation left the domain of an elementary function.

    ``component`` is filled in by :class:`~flatcert.expr.SmoothMap` with the
    index of the output component whose evaluation failed.
    """

    def __init__(self, message: str, component: int | None = None):
        self.reason = message
        self.component = component
        super().__init__(message if component is None else f"component {component}: {message}")

    def at_component(self, index: int) -> "DomainError":
        return DomainError(self.reason, component=index)


# -- numerics ----------------------------------------------------------------


class NonFiniteInput(FlatcertError, ValueError):
    pass


class SingularMatrix(FlatcertError, ArithmeticError):
    pass


class NoConvergence(FlatcertError, ArithmeticError):
    """Iterative solve failed; ``result`` holds the best iterate found."""

    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)


class DimensionMismatch(FlatcertError, ValueError):
    pass


# -- system / checks ---------------------------------------------------------


class ConsistencyFailure(FlatcertError):
    def __init__(self, sample: int, check: str, residual: float):
        self.sample = sample
        self.check = check
        self.residual = residual
        super().__init__(f"consistency check {check!r} failed at sample {sample}: residual {residual:.3e}")


class InvariantViolation(FlatcertError):
    pass


class MismatchedEquilibrium(FlatcertError, ValueError):
    """phi(y0, 0..0) is not the equilibrium passed in.

    ``stacked_rank`` still reports whether the dphi/dy_i generate R^n there,
    since that part of the chain needs no linearization.
    """

    def __init__(self, message: str, stacked_rank: int | None = None):
        super().__init__(message)
        self.stacked_rank = stacked_rank


class OutOfHorizon(FlatcertError, ValueError):
    pass


class InsufficientGrid(FlatcertError, ValueError):
    pass


# -- spec files / cli --------------------------------------------------------


class SpecError(FlatcertError):
    """Problem with a spec file; carries section and line when known."""

    def __init__(self, message: str, section: str | None = None, line: int | None = None):
        self.section = section
        self.line = line
        where = []
        if section:
            where.append(f"[{section}]")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{' '.join(where)}: {message}" if where else message)


class SpecParseError(SpecError):
    pass


class DimensionError(SpecError):
    pass


class UnknownKey(SpecError):
    pass


class UnknownCatalogEntry(FlatcertError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown catalog entry {self.name!r}"
