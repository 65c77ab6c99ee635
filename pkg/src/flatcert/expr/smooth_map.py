"""Vector-valued maps built from parsed expressions, with exact derivatives."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionMismatch, DomainError, UnknownVariable
from . import dual
from .dual import Dual, new_tag, primal, tangent
from .nodes import BinOp, Call, Const, Expr, Neg, Var, render, variables
from .parser import parse_expression

Compiled = Callable[[Sequence], object]


def _compile(node: Expr, index: dict[str, int]) -> Compiled:
    if isinstance(node, Const):
        value = float(node.value)
        return lambda vals: value
    if isinstance(node, Var):
        i = index[node.name]
        return lambda vals: vals[i]
    if isinstance(node, Neg):
        inner = _compile(node.arg, index)
        return lambda vals: dual.neg(inner(vals))
    if isinstance(node, BinOp):
        fn = dual.BINARY[node.op]
        left, right = _compile(node.left, index), _compile(node.right, index)
        return lambda vals: fn(left(vals), right(vals))
    if isinstance(node, Call):
        if len(node.args) == 1:
            fn1 = dual.UNARY[node.func]
            arg = _compile(node.args[0], index)
            return lambda vals: fn1(arg(vals))
        fn2 = dual.BINARY[node.func]
        a0, a1 = (_compile(a, index) for a in node.args)
        return lambda vals: fn2(a0(vals), a1(vals))
    raise TypeError(f"not an expression node: {node!r}")


class SmoothMap:
    """A map R^k -> R^l whose components are expression trees.

    Parameters
    ----------
    components : sequence of str or Expr
        One expression per output component.
    variables : sequence of str
        Ordered input names; Jacobian columns follow this order.
    """

    def __init__(self, components: Sequence[str | Expr], variables: Sequence[str]):
        names = tuple(variables)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        exprs = []
        for comp in components:
            node = parse_expression(comp, names) if isinstance(comp, str) else comp
            for name in _free_names(node):
                if name not in names:
                    raise UnknownVariable(name)
            exprs.append(node)
        self.variables = names
        self.exprs = tuple(exprs)
        index = {name: i for i, name in enumerate(names)}
        self._fns = tuple(_compile(e, index) for e in self.exprs)

    @property
    def n_inputs(self) -> int:
        return len(self.variables)

    @property
    def n_outputs(self) -> int:
        return len(self.exprs)

    def texts(self) -> list[str]:
        return [render(e) for e in self.exprs]

    def __repr__(self) -> str:
        return f"SmoothMap({self.texts()!r}, {list(self.variables)!r})"

    def _check_point(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.size != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} inputs, got {p.size}")
        return p

    def evaluate_generic(self, values: Sequence) -> list:
        """Evaluate on floats or duals; returns one value per component."""
        out = []
        for i, fn in enumerate(self._fns):
            try:
                out.append(fn(values))
            except DomainError as exc:
                raise exc.at_component(i) from None
        return out

    def evaluate(self, point) -> np.ndarray:
        p = self._check_point(point)
        return np.array(self.evaluate_generic(p.tolist()), dtype=float)

    __call__ = evaluate

    def jacobian_generic(self, values: Sequence, columns: Sequence[int] | None = None) -> list[list]:
        """Jacobian entries as generic values, one forward pass per column."""
        cols = range(len(values)) if columns is None else columns
        rows: list[list] = [[] for _ in self._fns]
        for k in cols:
            tag = new_tag()
            seeded = list(values)
            seeded[k] = Dual(values[k], 1.0, tag)
            for i, out in enumerate(self.evaluate_generic(seeded)):
                rows[i].append(tangent(out, tag))
        return rows

    def jacobian(self, point, columns: Sequence[int] | None = None) -> np.ndarray:
        p = self._check_point(point)
        rows = self.jacobian_generic(p.tolist(), columns)
        ncols = self.n_inputs if columns is None else len(columns)
        return np.array(rows, dtype=float).reshape(self.n_outputs, ncols)

    def directional_second(self, point, direction) -> np.ndarray:
        """d/de of the Jacobian at ``point + e*direction``, e = 0."""
        p = self._check_point(point)
        d = self._check_point(direction)
        tag = new_tag()
        vals = [Dual(pi, di, tag) if di != 0.0 else pi for pi, di in zip(p.tolist(), d.tolist())]
        rows = self.jacobian_generic(vals)
        out = [[primal(tangent(v, tag)) for v in row] for row in rows]
        return np.array(out, dtype=float).reshape(self.n_outputs, self.n_inputs)


def _free_names(node: Expr) -> set[str]:
    return variables(node)


def eval_map(smooth_map: SmoothMap, point) -> np.ndarray:
    return smooth_map.evaluate(point)


def eval_jacobian(smooth_map: SmoothMap, point) -> np.ndarray:
    return smooth_map.jacobian(point)


def directional_second(smooth_map: SmoothMap, point, direction) -> np.ndarray:
    return smooth_map.directional_second(point, direction)


def fd_jacobian(smooth_map, point, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian. Testing oracle only.

    Works for anything exposing ``evaluate``; stencil points outside the
    domain raise :class:`DomainError`.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    p = np.asarray(point, dtype=float).reshape(-1)
    cols = []
    for k in range(p.size):
        step = np.zeros_like(p)
        step[k] = h
        cols.append((smooth_map.evaluate(p + step) - smooth_map.evaluate(p - step)) / (2 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))
