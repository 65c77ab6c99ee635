"""Expression language: parsing, rendering, evaluation and forward-mode AD."""

from .nodes import FUNCTIONS, BinOp, Call, Const, Expr, Neg, Var, render, variables
from .parser import parse_expression, tokenize
from .smooth_map import SmoothMap, directional_second, eval_jacobian, eval_map, fd_jacobian

__all__ = [
    "FUNCTIONS",
    "BinOp",
    "Call",
    "Const",
    "Expr",
    "Neg",
    "Var",
    "SmoothMap",
    "directional_second",
    "eval_jacobian",
    "eval_map",
    "fd_jacobian",
    "parse_expression",
    "render",
    "tokenize",
    "variables",
]
