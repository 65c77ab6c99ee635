"""Implicit control systems F(x, p) = 0 with explicit parameterization p = f(x, u)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConsistencyFailure, DimensionMismatch, NoConvergence
from .expr import SmoothMap
from .numlin import DEFAULT_TOL_REL, orthonormal_basis, null_space, pinv, subspace_contains, svd_rank
from .report import FAIL, PASS, Block

INJECTIVITY_NOTE = (
    "fiberwise injectivity of u -> f(x, u) is not verifiable numerically; "
    "only the rank-m immersion condition is checked"
)


def names(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, count + 1)]


@dataclass(frozen=True)
class ImplicitSystem:
    """State dimension ``n``, input dimension ``m``, implicit map ``F`` and explicit ``f``.

    ``F`` reads variables ``x1..xn, p1..pn`` and has ``n - m`` components;
    ``f`` reads ``x1..xn, u1..um`` and has ``n`` components.
    """

    n: int
    m: int
    F: SmoothMap
    f: SmoothMap | None = None
    name: str = ""

    def __post_init__(self):
        if not 0 < self.m <= self.n:
            raise DimensionMismatch(f"need 0 < m <= n, got n={self.n}, m={self.m}")
        if self.F.variables != tuple(names("x", self.n) + names("p", self.n)):
            raise DimensionMismatch("F must read x1..xn, p1..pn")
        if self.F.n_outputs != self.n - self.m:
            raise DimensionMismatch(f"F needs n - m = {self.n - self.m} components, has {self.F.n_outputs}")
        if self.f is not None:
            if self.f.variables != tuple(names("x", self.n) + names("u", self.m)):
                raise DimensionMismatch("f must read x1..xn, u1..um")
            if self.f.n_outputs != self.n:
                raise DimensionMismatch(f"f needs n = {self.n} components, has {self.f.n_outputs}")

    @classmethod
    def from_expressions(cls, n: int, m: int, F: Sequence[str], f: Sequence[str] | None = None, name: str = ""):
        Fmap = SmoothMap(F, names("x", n) + names("p", n))
        fmap = None if f is None else SmoothMap(f, names("x", n) + names("u", m))
        return cls(n, m, Fmap, fmap, name)

    def require_explicit(self) -> SmoothMap:
        if self.f is None:
            raise ValueError(f"system {self.name!r} has no explicit parameterization f")
        return self.f

    def implicit(self, x, p) -> np.ndarray:
        return self.F.evaluate(np.concatenate([x, p]))

    def implicit_jacobians(self, x, p) -> tuple[np.ndarray, np.ndarray]:
        """``(dF/dx, dF/dp)`` at ``(x, p)``."""
        J = self.F.jacobian(np.concatenate([x, p]))
        return J[:, : self.n], J[:, self.n :]

    def explicit(self, x, u) -> np.ndarray:
        return self.require_explicit().evaluate(np.concatenate([x, u]))

    def explicit_jacobians(self, x, u) -> tuple[np.ndarray, np.ndarray]:
        """``(df/dx, df/du)`` at ``(x, u)``."""
        J = self.require_explicit().jacobian(np.concatenate([x, u]))
        return J[:, : self.n], J[:, self.n :]


@dataclass(frozen=True)
class EquilibriumPoint:
    x: np.ndarray
    u: np.ndarray
    residual: float
    iterations: int = 0


@dataclass(frozen=True)
class VarietySample:
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    residuals: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self):
        return iter(zip(self.x, self.p, self.u))


def check_consistency(
    sys: ImplicitSystem,
    n_samples: int = 100,
    seed: int = 0,
    tol: float = 1e-9,
    scale: float = 1.0,
    tol_rel: float = DEFAULT_TOL_REL,
    raise_on_failure: bool = True,
) -> Block:
    """Check F(x, f(x, u)) = 0, rank dF/dp = n - m and Im df/du = Ker dF/dp on samples."""
    sys.require_explicit()
    rng = np.random.default_rng(seed)
    n, m = sys.n, sys.m
    worst = {"F_residual": 0.0, "image_in_kernel": 0.0, "kernel_in_image": 0.0}
    ranks_Fp, ranks_fu = set(), set()
    failure = None
    for k in range(n_samples):
        x = rng.normal(0.0, scale, n)
        u = rng.normal(0.0, scale, m)
        p = sys.explicit(x, u)
        res = float(np.linalg.norm(sys.implicit(x, p)))
        _, Jp = sys.implicit_jacobians(x, p)
        _, Bmat = sys.explicit_jacobians(x, u)
        rank_Fp = svd_rank(Jp, tol_rel).rank if Jp.size else 0
        rank_fu = svd_rank(Bmat, tol_rel).rank
        kernel = null_space(Jp, tol_rel) if Jp.size else np.eye(n)
        _, r1 = subspace_contains(kernel, Bmat, tol, tol_rel)
        _, r2 = subspace_contains(Bmat, kernel, tol, tol_rel)
        worst["F_residual"] = max(worst["F_residual"], res)
        worst["image_in_kernel"] = max(worst["image_in_kernel"], r1)
        worst["kernel_in_image"] = max(worst["kernel_in_image"], r2)
        ranks_Fp.add(rank_Fp)
        ranks_fu.add(rank_fu)
        if failure is None:
            if res > tol:
                failure = (k, "F(x,f(x,u)) = 0", res)
            elif rank_Fp != n - m:
                failure = (k, "rank dF/dp = n-m", float(rank_Fp))
            elif rank_fu != m:
                failure = (k, "rank df/du = m", float(rank_fu))
            elif max(r1, r2) > tol:
                failure = (k, "Im df/du = Ker dF/dp", max(r1, r2))
    if failure is not None and raise_on_failure:
        raise ConsistencyFailure(*failure)
    evidence = {
        "samples": n_samples,
        "seed": seed,
        "max_F_residual": worst["F_residual"],
        "max_image_in_kernel_residual": worst["image_in_kernel"],
        "max_kernel_in_image_residual": worst["kernel_in_image"],
        "ranks_dF_dp": sorted(ranks_Fp),
        "ranks_df_du": sorted(ranks_fu),
        "note": INJECTIVITY_NOTE,
    }
    if failure is None:
        return Block("consistency", PASS, evidence=evidence, verdict=f"F(x,f(x,u))=0 and Im df/du = Ker dF/dp on {n_samples} samples")
    k, what, value = failure
    evidence["failure"] = {"sample": k, "check": what, "value": value}
    return Block("consistency", FAIL, evidence=evidence, verdict=f"{what} violated at sample {k} ({value:.3e})")


def _equilibrium_step(Jx: np.ndarray, Ju: np.ndarray, r: np.ndarray, tol_rel: float):
    # inputs absorb what they can; the state moves only along what they cannot reach
    Q = orthonormal_basis(Ju, tol_rel)
    proj = np.eye(len(r)) - Q @ Q.T
    dx = pinv(proj @ Jx, tol_rel) @ (proj @ r)
    du = pinv(Ju, tol_rel) @ (r - Jx @ dx)
    return dx, du


def find_equilibrium(
    sys: ImplicitSystem,
    x_guess,
    u_guess=None,
    max_iter: int = 50,
    tol: float = 1e-10,
    tol_rel: float = DEFAULT_TOL_REL,
) -> EquilibriumPoint:
    """Solve f(x, u) = 0 by Gauss-Newton starting at the guess.

    Each step is the minimum-norm state correction that the inputs cannot
    absorb, followed by the minimum-norm input correction; equilibria are
    therefore found close to the guessed state.
    """
    f = sys.require_explicit()
    x = np.asarray(x_guess, dtype=float).reshape(sys.n).copy()
    u = np.zeros(sys.m) if u_guess is None else np.asarray(u_guess, dtype=float).reshape(sys.m).copy()
    r = -f.evaluate(np.concatenate([x, u]))
    res = float(np.linalg.norm(r))
    it = 0
    while res > tol and it < max_iter:
        Jx, Ju = sys.explicit_jacobians(x, u)
        dx, du = _equilibrium_step(Jx, Ju, r, tol_rel)
        alpha = 1.0
        for _ in range(30):
            xc, uc = x + alpha * dx, u + alpha * du
            rc = -f.evaluate(np.concatenate([xc, uc]))
            if np.linalg.norm(rc) <= res:
                break
            alpha *= 0.5
        else:
            break
        it += 1
        x, u, r = xc, uc, rc
        res = float(np.linalg.norm(r))
    if res > tol:
        raise NoConvergence(f"no equilibrium found near guess (residual {res:.3e})", EquilibriumPoint(x, u, res, it))
    return EquilibriumPoint(x, u, res, it)


def sample_variety(
    sys: ImplicitSystem,
    n_samples: int = 100,
    seed: int = 0,
    scale: float = 1.0,
    tol: float = 1e-9,
) -> VarietySample:
    """Seeded Gaussian points (x, u) mapped to variety points (x, f(x, u))."""
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, scale, (n_samples, sys.n))
    u = rng.normal(0.0, scale, (n_samples, sys.m))
    p = np.array([sys.explicit(xi, ui) for xi, ui in zip(x, u)]).reshape(n_samples, sys.n)
    residuals = np.array([np.linalg.norm(sys.implicit(xi, pi)) for xi, pi in zip(x, p)])
    bad = np.flatnonzero(residuals > tol)
    if bad.size:
        raise ConsistencyFailure(int(bad[0]), "F(x,f(x,u)) = 0", float(residuals[bad[0]]))
    return VarietySample(x, u, p, residuals)
