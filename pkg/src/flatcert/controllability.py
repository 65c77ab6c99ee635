"""Linearization at equilibria, the differentiated PDE identities and the Kalman test.

Differentiating ``F(phi, L_tau phi) = 0`` with respect to each jet level and
using ``[d/dy_i, L_tau] = d/dy_{i-1}`` gives, with ``J_i = dphi/dy_i``:

    (i)   Fx J_0 + Fp L(J_0)              = 0
    (ii)  Fx J_i + Fp L(J_i) + Fp J_{i-1}  = 0      1 <= i <= r
    (iii) Fp J_r                          = 0

At an equilibrium jet the ``L`` terms vanish. Substituting ``Fx = -Fp A``
turns (ii) into ``J_{i-1} - A J_i in Ker Fp = Im B``, hence inductively
``Im J_i ⊂ span(B, AB, ..., A^(r-i) B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvariantViolation, MismatchedEquilibrium
from .jets import JetPoint, ParameterFunction, phi_big
from .numlin import DEFAULT_TOL_REL, RankResult, null_space, subspace_contains, svd_rank
from .report import FAIL, PASS, Block
from .system import EquilibriumPoint, ImplicitSystem


@dataclass(frozen=True)
class Linearization:
    A: np.ndarray
    B: np.ndarray
    eq: EquilibriumPoint | None = None
    structure_residual: float = 0.0
    kernel_residual: float = 0.0


def linearize(sys: ImplicitSystem, eq: EquilibriumPoint, tol: float = 1e-8, tol_rel: float = DEFAULT_TOL_REL) -> Linearization:
    """``A = df/dx``, ``B = df/du`` at ``eq``, with ``Fx + Fp A = 0`` and ``Im B = Ker Fp`` checked."""
    if eq.residual > 1e-8:
        raise ValueError(f"equilibrium residual {eq.residual:.3e} too large to linearize at")
    A, B = sys.explicit_jacobians(eq.x, eq.u)
    Fx, Fp = sys.implicit_jacobians(eq.x, np.zeros(sys.n))
    structure = float(np.linalg.norm(Fx + Fp @ A))
    if structure > tol * max(1.0, float(np.linalg.norm(Fx))):
        raise InvariantViolation(f"dF/dx + dF/dp A = {structure:.3e} at equilibrium; F and f disagree")
    kernel = null_space(Fp, tol_rel) if Fp.size else np.eye(sys.n)
    _, r1 = subspace_contains(kernel, B, tol, tol_rel)
    _, r2 = subspace_contains(B, kernel, tol, tol_rel)
    if max(r1, r2) > tol:
        raise InvariantViolation(f"Im df/du != Ker dF/dp at equilibrium (residual {max(r1, r2):.3e})")
    return Linearization(A, B, eq, structure, max(r1, r2))


def krylov_matrix(A: np.ndarray, B: np.ndarray, blocks: int) -> np.ndarray:
    """``[B, AB, ..., A^(blocks-1) B]``."""
    cols = [B]
    for _ in range(blocks - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def kalman_rank(lin: Linearization, tol_rel: float = DEFAULT_TOL_REL) -> RankResult:
    """Rank of ``[B, AB, ..., A^(n-1) B]``; controllable iff it equals n."""
    A = np.asarray(lin.A, dtype=float)
    B = np.asarray(lin.B, dtype=float).reshape(A.shape[0], -1)
    return svd_rank(krylov_matrix(A, B, A.shape[0]), tol_rel)


# -- differentiated PDE identities --------------------------------------------


def structure_identity_residuals(sys: ImplicitSystem, pf: ParameterFunction, jet) -> dict[str, object]:
    """Frobenius residuals of identities (i)-(iii) at a general jet."""
    jet = pf.jet(jet)
    x, p = phi_big(pf, jet)
    Fx, Fp = sys.implicit_jacobians(x, p)
    J = pf.jacobians(jet)
    LJ = pf.shifted_jacobians(jet)
    first = float(np.linalg.norm(Fx @ J[0] + Fp @ LJ[0]))
    middle = [float(np.linalg.norm(Fx @ J[i] + Fp @ LJ[i] + Fp @ J[i - 1])) for i in range(1, pf.r + 1)]
    last = float(np.linalg.norm(Fp @ J[pf.r]))
    return {"i": first, "ii": middle, "iii": last}


def equilibrium_identity_residuals(sys: ImplicitSystem, pf: ParameterFunction, y0) -> dict[str, object]:
    """Residuals of (i)-(iii) specialised to ``y_1 = ... = y_{r+1} = 0``."""
    jet = JetPoint.equilibrium(y0, pf.r)
    x0 = pf.state(jet)
    Fx, Fp = sys.implicit_jacobians(x0, np.zeros(sys.n))
    J = pf.jacobians(jet)
    first = float(np.linalg.norm(Fx @ J[0]))
    middle = [float(np.linalg.norm(Fx @ J[i] + Fp @ J[i - 1])) for i in range(1, pf.r + 1)]
    last = float(np.linalg.norm(Fp @ J[pf.r]))
    return {"i": first, "ii": middle, "iii": last}


def _worst(res: dict[str, object]) -> float:
    return max([res["i"], res["iii"], *res["ii"]])


def _identity_block(name: str, residuals: list, errors: list, tol: float, mandatory: bool, where: str) -> Block:
    worst = max((_worst(r) for r in residuals), default=0.0)
    evidence = {
        "points": len(residuals) + len(errors),
        "tolerance": tol,
        "max_residual": worst,
        "max_residual_i": max((r["i"] for r in residuals), default=0.0),
        "max_residual_ii": max((max(r["ii"], default=0.0) for r in residuals), default=0.0),
        "max_residual_iii": max((r["iii"] for r in residuals), default=0.0),
        "domain_errors": len(errors),
        "domain_error_samples": errors[:5],
    }
    if errors:
        return Block(name, FAIL, mandatory, evidence, f"DomainError at {where}: {errors[0]['cause']}")
    if not residuals:
        return Block(name, FAIL, mandatory, evidence, f"no {where} evaluated")
    if worst > tol:
        return Block(name, FAIL, mandatory, evidence, f"identity residual {worst:.3e} exceeds {tol:.1e}")
    return Block(name, PASS, mandatory, evidence, f"identities (i)-(iii) hold to {worst:.3e} at {len(residuals)} {where}")


def check_structure_identities(sys: ImplicitSystem, pf: ParameterFunction, jets, tol: float = 1e-8) -> Block:
    """Identities (i)-(iii) at one jet or a list of jets (informative block)."""
    if isinstance(jets, JetPoint) or np.ndim(jets) == 2:
        jets = [jets]
    residuals, errors = [], []
    for k, jet in enumerate(jets):
        try:
            residuals.append(structure_identity_residuals(sys, pf, jet))
        except DomainError as exc:
            errors.append({"sample": k, "cause": str(exc)})
    return _identity_block("structure-identities", residuals, errors, tol, False, "jets")


def check_equilibrium_identities(sys: ImplicitSystem, pf: ParameterFunction, y0s, tol: float = 1e-10) -> Block:
    y0s = np.atleast_2d(np.asarray(y0s, dtype=float).reshape(-1, pf.m))
    residuals, errors = [], []
    for k, y0 in enumerate(y0s):
        try:
            residuals.append(equilibrium_identity_residuals(sys, pf, y0))
        except DomainError as exc:
            errors.append({"sample": k, "cause": str(exc)})
    return _identity_block("equilibrium-identities", residuals, errors, tol, True, "equilibrium jets")


# -- inclusion chain ----------------------------------------------------------


@dataclass
class ChainReport:
    inclusion_residuals: dict[int, float]
    kalman_rank: int
    stacked_rank: int
    n: int
    tol: float
    included: dict[int, bool] = field(default_factory=dict)

    @property
    def generates(self) -> bool:
        return self.stacked_rank == self.n

    @property
    def passed(self) -> bool:
        return all(self.included.values()) and self.generates

    @property
    def max_inclusion_residual(self) -> float:
        return max(self.inclusion_residuals.values(), default=0.0)


def generated_rank(pf: ParameterFunction, y0, tol_rel: float = DEFAULT_TOL_REL) -> int:
    """Rank of ``[dphi/dy_0 ... dphi/dy_r]`` at the equilibrium jet over ``y0``."""
    return svd_rank(np.hstack(pf.jacobians(JetPoint.equilibrium(y0, pf.r))), tol_rel).rank


def check_chain_inclusions(
    sys: ImplicitSystem,
    pf: ParameterFunction,
    eq: EquilibriumPoint,
    y0,
    tol: float = 1e-8,
    tol_rel: float = DEFAULT_TOL_REL,
) -> ChainReport:
    """``Im dphi/dy_i ⊂ span(B, ..., A^(r-i) B)`` for i = r..0, plus rank [J_0 .. J_r] = n."""
    jet = JetPoint.equilibrium(y0, pf.r)
    x0 = pf.state(jet)
    gap = float(np.linalg.norm(x0 - eq.x))
    if gap > tol:
        raise MismatchedEquilibrium(
            f"phi(y0, 0..0) is {gap:.3e} away from the equilibrium state",
            stacked_rank=generated_rank(pf, y0, tol_rel),
        )
    lin = linearize(sys, eq, tol_rel=tol_rel)
    J = pf.jacobians(jet)
    residuals, included = {}, {}
    for i in range(pf.r, -1, -1):
        # Cayley-Hamilton: powers beyond n-1 add nothing
        K = krylov_matrix(lin.A, lin.B, min(pf.r - i, sys.n - 1) + 1)
        ok, res = subspace_contains(K, J[i], tol, tol_rel)
        residuals[i], included[i] = res, ok
    stacked = svd_rank(np.hstack(J), tol_rel).rank
    return ChainReport(residuals, kalman_rank(lin, tol_rel).rank, stacked, sys.n, tol, included)


def chain_block(reports: Sequence[ChainReport], errors: Sequence[dict] = (), n: int | None = None) -> Block:
    evidence = {
        "points": len(reports) + len(errors),
        "max_inclusion_residual": max((r.max_inclusion_residual for r in reports), default=0.0),
        "stacked_ranks": sorted({r.stacked_rank for r in reports} | {e["stacked_rank"] for e in errors if "stacked_rank" in e}),
        "kalman_ranks": sorted({r.kalman_rank for r in reports}),
        "required_rank": n if n is not None else (reports[0].n if reports else None),
        "errors": list(errors)[:5],
    }
    if errors:
        verdict = f"chain not evaluable: {errors[0]['cause']}"
        low = [e["stacked_rank"] for e in errors if e.get("stacked_rank", evidence["required_rank"]) < evidence["required_rank"]]
        if low:
            verdict += f"; dphi/dy_i do not generate R^n (stacked rank {min(low)})"
        return Block("chain-inclusions", FAIL, evidence=evidence, verdict=verdict)
    if not reports:
        return Block("chain-inclusions", FAIL, evidence=evidence, verdict="no equilibrium jets evaluated")
    bad_incl = [r for r in reports if not all(r.included.values())]
    bad_gen = [r for r in reports if not r.generates]
    if bad_incl or bad_gen:
        parts = []
        if bad_incl:
            parts.append(f"inclusion residual {evidence['max_inclusion_residual']:.3e} exceeds {reports[0].tol:.1e}")
        if bad_gen:
            parts.append(f"dphi/dy_i do not generate R^n (stacked rank {min(r.stacked_rank for r in bad_gen)})")
        return Block("chain-inclusions", FAIL, evidence=evidence, verdict="; ".join(parts))
    return Block(
        "chain-inclusions",
        PASS,
        evidence=evidence,
        verdict=f"inclusions hold to {evidence['max_inclusion_residual']:.3e}; dphi/dy_i generate R^n at {len(reports)} equilibria",
    )


def kalman_block(ranks: Sequence[int], n: int, errors: Sequence[dict] = ()) -> Block:
    evidence = {"equilibria": len(ranks), "ranks": sorted(set(ranks)), "required_rank": n, "errors": list(errors)[:5]}
    if not ranks:
        return Block("kalman", FAIL, evidence=evidence, verdict="no equilibrium found to linearize at")
    if min(ranks) < n:
        return Block("kalman", FAIL, evidence=evidence, verdict=f"Kalman rank {min(ranks)} < n = {n}: not controllable")
    return Block("kalman", PASS, evidence=evidence, verdict=f"rank [B AB ... A^(n-1)B] = {n} at {len(ranks)} equilibria")
