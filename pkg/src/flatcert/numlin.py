"""Dense linear-algebra and local-solver primitives.

Every rank decision in flatcert goes through :func:`svd_rank`, which uses a
threshold *relative* to the largest singular value. A singular value equal
to the threshold counts as nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoConvergence, NonFiniteInput, SingularMatrix

DEFAULT_TOL_REL = 1e-8


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: np.ndarray
    threshold: float


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _finite(M, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    return A


def _svd(A: np.ndarray, tol_rel: float):
    if A.size == 0:
        return np.zeros((A.shape[0], 0)), np.zeros(0), np.zeros((0, A.shape[1])), 0.0, 0
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    threshold = float(tol_rel * smax)
    rank = 0 if smax == 0.0 else int(np.count_nonzero(s >= threshold))
    return U, s, Vt, threshold, rank


def svd_rank(M, tol_rel: float = DEFAULT_TOL_REL) -> RankResult:
    if not 0.0 < tol_rel < 1.0:
        raise ValueError("tol_rel must lie in (0, 1)")
    A = _finite(M)
    _, s, _, threshold, rank = _svd(A, tol_rel)
    return RankResult(rank, s, threshold)


def orthonormal_basis(M, tol_rel: float = DEFAULT_TOL_REL) -> np.ndarray:
    """Orthonormal columns spanning the numerical column space of ``M``."""
    A = _finite(M)
    U, _, _, _, rank = _svd(A, tol_rel)
    return U[:, :rank].copy()


def null_space(M, tol_rel: float = DEFAULT_TOL_REL) -> np.ndarray:
    """Orthonormal columns spanning the numerical kernel of ``M``."""
    A = _finite(M)
    _, _, Vt, _, rank = _svd(A, tol_rel)
    if Vt.shape[0] == 0:
        return np.eye(A.shape[1])
    return Vt[rank:].T.copy()


def pinv(M, tol_rel: float = DEFAULT_TOL_REL) -> np.ndarray:
    A = _finite(M)
    U, s, Vt, _, rank = _svd(A, tol_rel)
    if rank == 0:
        return np.zeros((A.shape[1], A.shape[0]))
    return (Vt[:rank].T / s[:rank]) @ U[:, :rank].T


def subspace_contains(K, M, tol: float = 1e-8, tol_rel: float = DEFAULT_TOL_REL) -> tuple[bool, float]:
    """Test ``Im M ⊂ span K``.

    The residual is ``||(I - Q Q^T) M||_F / max(1, ||M||_F)`` where ``Q`` is an
    orthonormal basis of ``K``.
    """
    Kf = _finite(K, "K")
    Mf = _finite(M, "M")
    if Kf.shape[0] != Mf.shape[0]:
        raise ValueError(f"row mismatch: K has {Kf.shape[0]}, M has {Mf.shape[0]}")
    Q = orthonormal_basis(Kf, tol_rel)
    R = Mf - Q @ (Q.T @ Mf)
    residual = float(np.linalg.norm(R) / max(1.0, np.linalg.norm(Mf)))
    return residual <= tol, residual


def solve_linear(A, b) -> np.ndarray:
    Af = _finite(A, "A")
    bf = np.asarray(b, dtype=float).reshape(-1)
    if Af.shape[0] != Af.shape[1]:
        raise ValueError("A must be square")
    if not np.all(np.isfinite(bf)):
        raise NonFiniteInput("b has non-finite entries")
    if svd_rank(Af, 1e-14).rank < Af.shape[0]:
        raise SingularMatrix("matrix is numerically singular")
    x = np.linalg.solve(Af, bf)
    bound = 1e-10 * (np.linalg.norm(Af, 2) * np.linalg.norm(x) + np.linalg.norm(bf))
    if np.linalg.norm(Af @ x - bf) > bound:
        raise SingularMatrix("solution residual exceeds bound; matrix too ill-conditioned")
    return x


def _as_map(fun, jac):
    if jac is not None:
        return fun, jac
    if hasattr(fun, "evaluate") and hasattr(fun, "jacobian"):
        return fun.evaluate, fun.jacobian
    raise TypeError("pass a map with evaluate/jacobian or give jac explicitly")


def gauss_newton_solve(
    fun,
    target,
    init,
    jac=None,
    max_iter: int = 50,
    tol: float = 1e-10,
    tol_rel: float = DEFAULT_TOL_REL,
    raise_on_failure: bool = False,
    max_halvings: int = 20,
    stall_rel: float = 1e-6,
) -> SolveResult:
    """Solve ``fun(x) = target`` by damped Gauss-Newton with minimum-norm steps.

    ``fun`` is either an object with ``evaluate``/``jacobian`` methods (e.g.
    :class:`~flatcert.expr.SmoothMap`) or a callable paired with ``jac``.
    The step is halved (at most ``max_halvings`` times) while the residual
    norm would increase; iteration stops early once a full iteration shrinks
    the residual by less than the fraction ``stall_rel``. Without
    convergence the best iterate is returned with ``converged=False``.
    """
    evaluate, jacobian = _as_map(fun, jac)
    y = np.asarray(target, dtype=float).reshape(-1)
    x = np.asarray(init, dtype=float).reshape(-1).copy()
    r = y - np.asarray(evaluate(x), dtype=float)
    res = float(np.linalg.norm(r))
    it = 0
    while res > tol and it < max_iter:
        step = pinv(jacobian(x), tol_rel) @ r
        if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break  # stationary: no direction reduces the residual
        alpha = 1.0
        improved = False
        for _ in range(max_halvings):
            cand = x + alpha * step
            try:
                r_new = y - np.asarray(evaluate(cand), dtype=float)
            except DomainError:
                alpha *= 0.5
                continue
            res_new = float(np.linalg.norm(r_new))
            if res_new <= res:
                improved = True
                break
            alpha *= 0.5
        it += 1
        if not improved:
            break
        stalled = res - res_new <= stall_rel * res
        x, r, res = cand, r_new, res_new
        if stalled:
            break
    result = SolveResult(x, res, it, res <= tol)
    if raise_on_failure and not result.converged:
        raise NoConvergence(f"Gauss-Newton stopped at residual {res:.3e} after {it} iterations", result)
    return result
