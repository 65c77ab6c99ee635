"""Numerical certification of differential-flatness criteria for control systems."""

__version__ = "0.1.0"

from .controllability import (  # noqa: E402
    check_chain_inclusions,
    check_equilibrium_identities,
    check_structure_identities,
    kalman_rank,
    linearize,
)
from .estimators import FlatnessCertifier, FlatPathPlanner  # noqa: E402
from .expr import SmoothMap, parse_expression, render  # noqa: E402
from .jets import (  # noqa: E402
    JetPoint,
    JetSampler,
    ParameterFunction,
    check_equilibrium_map,
    check_parameter_function,
    check_submersion,
    pde_residual,
    phi_big,
    surjectivity_probe,
    total_derivative,
)
from .planner import eval_flat_jet, fit_flat_path, recover_inputs, synthesize_trajectory  # noqa: E402
from .specfile import load_spec, parse_spec  # noqa: E402
from .system import ImplicitSystem, check_consistency, find_equilibrium, sample_variety  # noqa: E402

__all__ = [
    "FlatPathPlanner",
    "FlatnessCertifier",
    "ImplicitSystem",
    "JetPoint",
    "JetSampler",
    "ParameterFunction",
    "SmoothMap",
    "check_chain_inclusions",
    "check_consistency",
    "check_equilibrium_identities",
    "check_equilibrium_map",
    "check_parameter_function",
    "check_structure_identities",
    "check_submersion",
    "eval_flat_jet",
    "find_equilibrium",
    "fit_flat_path",
    "kalman_rank",
    "linearize",
    "load_spec",
    "parse_expression",
    "parse_spec",
    "pde_residual",
    "phi_big",
    "recover_inputs",
    "render",
    "sample_variety",
    "surjectivity_probe",
    "synthesize_trajectory",
    "total_derivative",
]
