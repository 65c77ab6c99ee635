"""Flat trajectory planning: polynomial flat outputs, state synthesis, input recovery."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DimensionMismatch, DomainError, InsufficientGrid, OutOfHorizon
from .expr import SmoothMap
from .jets import Guard, JetPoint, ParameterFunction, phi_big
from .numlin import gauss_newton_solve, pinv, solve_linear
from .report import FAIL, PASS, Block, jsonable
from .system import ImplicitSystem, names


@dataclass(frozen=True)
class PolyPath:
    """Per-channel polynomial coefficients (ascending powers of t) on [0, T]."""

    coef: np.ndarray  # shape (m, degree + 1)
    T: float
    r: int

    @property
    def m(self) -> int:
        return self.coef.shape[0]

    @property
    def degree(self) -> int:
        return self.coef.shape[1] - 1


def boundary_matrix(t: float, orders: int, degree: int) -> np.ndarray:
    """Rows ``d^k/dt^k [1, t, ..., t^degree]`` at ``t`` for k < orders."""
    M = np.zeros((orders, degree + 1))
    for k in range(orders):
        for j in range(k, degree + 1):
            M[k, j] = math.perm(j, k) * t ** (j - k)
    return M


def fit_flat_path(start_jet, end_jet, T: float, degree: int | None = None) -> PolyPath:
    """Interpolate derivative orders 0..r+1 at both ends, channel by channel.

    ``degree`` defaults to ``2r + 3``, where the system is square; higher
    degrees take the minimum-norm coefficient vector.
    """
    a = np.atleast_2d(np.asarray(start_jet, dtype=float))
    b = np.atleast_2d(np.asarray(end_jet, dtype=float))
    if a.ndim != 2 or a.shape != b.shape:
        raise DimensionMismatch(f"start and end jets must share shape (r+2, m); got {a.shape} and {b.shape}")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    orders, m = a.shape
    r = orders - 2
    if r < 0:
        raise DimensionMismatch("jets need at least two levels (r >= 0)")
    d = 2 * r + 3 if degree is None else int(degree)
    if d < 2 * r + 3:
        raise ValueError(f"degree {d} too low; need at least 2r+3 = {2 * r + 3}")
    M = np.vstack([boundary_matrix(0.0, orders, d), boundary_matrix(float(T), orders, d)])
    coef = np.zeros((m, d + 1))
    for j in range(m):
        rhs = np.concatenate([a[:, j], b[:, j]])
        coef[j] = solve_linear(M, rhs) if M.shape[0] == M.shape[1] else pinv(M, 1e-14) @ rhs
    return PolyPath(coef, float(T), r)


def eval_flat_jet(path: PolyPath, t: float) -> JetPoint:
    """Exact derivatives 0..r+1 of the path at time ``t``."""
    slack = 1e-12 * max(1.0, path.T)
    if t < -slack or t > path.T + slack:
        raise OutOfHorizon(f"t = {t} outside [0, {path.T}]")
    levels = np.empty((path.r + 2, path.m))
    for j in range(path.m):
        c = path.coef[j]
        for k in range(path.r + 2):
            levels[k, j] = P.polyval(t, P.polyder(c, k)) if k <= path.degree else 0.0
    return JetPoint(levels)


@dataclass
class Trajectory:
    t: np.ndarray
    jets: np.ndarray  # (N+1, r+2, m)
    x: np.ndarray
    xdot: np.ndarray
    u: np.ndarray
    residual: np.ndarray
    input_residual: np.ndarray
    status: list[str]

    @property
    def max_residual(self) -> float:
        ok = [i for i, s in enumerate(self.status) if s != "domain_error"]
        return float(np.max(self.residual[ok])) if ok else float("inf")

    @property
    def all_inputs_recovered(self) -> bool:
        return all(np.isfinite(self.input_residual)) and not any(s in ("domain_error", "no_convergence", "pending") for s in self.status)

    def columns(self) -> list[str]:
        _, levels, m = self.jets.shape
        n = self.x.shape[1]
        return (
            ["t"]
            + [f"y{i}_{j}" for i in range(levels) for j in range(1, m + 1)]
            + names("x", n)
            + names("xdot", n)
            + names("u", self.u.shape[1])
            + ["residual", "input_residual", "status"]
        )

    def rows(self):
        for k in range(len(self.t)):
            yield (
                [self.t[k]]
                + self.jets[k].reshape(-1).tolist()
                + self.x[k].tolist()
                + self.xdot[k].tolist()
                + self.u[k].tolist()
                + [self.residual[k], self.input_residual[k], self.status[k]]
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for row in self.rows():
            writer.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "columns": self.columns(),
            "rows": jsonable(list(self.rows())),
            "max_residual": jsonable(self.max_residual),
            "all_inputs_recovered": self.all_inputs_recovered,
        }


def synthesize_trajectory(
    sys: ImplicitSystem,
    pf: ParameterFunction,
    path: PolyPath,
    grid_n: int = 1000,
    guard: Guard | None = None,
) -> Trajectory:
    """States ``x = phi(jet)``, ``xdot = L_tau phi(jet)`` and ``|F(x, xdot)|`` on a uniform grid.

    Nodes where phi fails are marked ``domain_error`` and filled with NaN;
    nodes outside ``guard`` are marked ``outside_guard`` but still computed.
    """
    if path.m != pf.m or path.r != pf.r:
        raise DimensionMismatch(f"path is (m={path.m}, r={path.r}) but phi is (m={pf.m}, r={pf.r})")
    t = np.linspace(0.0, path.T, grid_n + 1)
    N = len(t)
    jets = np.empty((N, pf.r + 2, pf.m))
    x = np.full((N, pf.n), np.nan)
    xdot = np.full((N, pf.n), np.nan)
    residual = np.full(N, np.nan)
    status = []
    for k, tk in enumerate(t):
        jet = eval_flat_jet(path, tk)
        jets[k] = jet.levels
        try:
            x[k], xdot[k] = phi_big(pf, jet)
            residual[k] = np.linalg.norm(sys.implicit(x[k], xdot[k]))
        except DomainError:
            status.append("domain_error")
            continue
        status.append("outside_guard" if guard is not None and not guard.accepts(jet) else "pending")
    u = np.full((N, pf.m), np.nan)
    return Trajectory(t, jets, x, xdot, u, residual, np.full(N, np.nan), status)


class _InputMap:
    """``u -> f(x, u)`` at a fixed state."""

    def __init__(self, f: SmoothMap, x: np.ndarray, m: int):
        self.f, self.x, self.cols = f, x, range(len(x), len(x) + m)

    def evaluate(self, u):
        return self.f.evaluate(np.concatenate([self.x, u]))

    def jacobian(self, u):
        return self.f.jacobian(np.concatenate([self.x, u]), columns=self.cols)


def recover_inputs(sys: ImplicitSystem, traj: Trajectory, tol: float = 1e-9) -> Trajectory:
    """Solve ``f(x, u) = xdot`` for ``u`` at each node, warm-started from the previous node."""
    f = sys.require_explicit()
    u = np.full((len(traj.t), sys.m), np.nan)
    input_res = np.full(len(traj.t), np.nan)
    status = list(traj.status)
    guess = np.zeros(sys.m)
    for k in range(len(traj.t)):
        if status[k] == "domain_error":
            continue
        try:
            sol = gauss_newton_solve(_InputMap(f, traj.x[k], sys.m), traj.xdot[k], guess, tol=tol * 1e-1)
        except DomainError:
            status[k] = "domain_error"
            continue
        u[k], input_res[k] = sol.x, sol.residual
        if sol.converged or sol.residual <= tol:
            guess = sol.x
            if status[k] == "pending":
                status[k] = "ok"
        else:
            status[k] = "no_convergence"
    return replace(traj, u=u, input_residual=input_res, status=status)


def _fd_derivatives(values: np.ndarray, dt: float, order: int) -> list[np.ndarray]:
    out = [values]
    for _ in range(order):
        out.append(np.gradient(out[-1], dt, axis=0))
    return out


def roundtrip_check(psi: SmoothMap, order: int, traj: Trajectory, tol: float = 1e-4) -> Block:
    """Compare ``psi(x, xdot, ..., x^(s))`` against the planned flat output.

    State derivatives come from central differences on the trajectory grid,
    so only interior nodes are compared.
    """
    N = len(traj.t) - 1
    if order > 0 and N < 50 * order:
        raise InsufficientGrid(f"grid of {N} intervals too coarse for order {order}; need >= {50 * order}")
    dt = traj.t[1] - traj.t[0] if N > 0 else 1.0
    derivs = _fd_derivatives(traj.x, dt, order)
    worst = 0.0
    checked = 0
    for k in range(order, N + 1 - order):
        if traj.status[k] == "domain_error":
            continue
        xjet = np.concatenate([d[k] for d in derivs])
        worst = max(worst, float(np.linalg.norm(psi.evaluate(xjet) - traj.jets[k, 0])))
        checked += 1
    evidence = {"order": order, "nodes": checked, "max_error": worst, "tolerance": tol}
    if checked and worst <= tol:
        return Block("roundtrip", PASS, False, evidence, f"psi recovers y to {worst:.3e} on {checked} nodes")
    return Block("roundtrip", FAIL, False, evidence, f"psi misses y by {worst:.3e} (tol {tol:.1e})")


def psi_names(n: int, order: int) -> list[str]:
    """Variables of psi: ``x{k}_{j}`` for derivative order k and state j."""
    return [f"x{k}_{j}" for k in range(order + 1) for j in range(1, n + 1)]
