"""Jets, the total-derivative operator and the flatness-criterion checks.

A jet of order ``r + 1`` in ``m`` channels is stored as an array of shape
``(r + 2, m)``; row ``i`` holds the ``i``-th derivative ``y_i``. Its
expression variables are named ``y{i}_{j}`` (level ``i``, channel ``j``,
channels counted from 1) and flattened level by level.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, ExpressionSyntaxError
from .expr import SmoothMap
from .expr.dual import Dual, new_tag, strip, tangent
from .numlin import DEFAULT_TOL_REL, gauss_newton_solve, svd_rank
from .report import FAIL, INCONCLUSIVE, PASS, Block
from .system import ImplicitSystem, NoConvergence, VarietySample, find_equilibrium

PROBE_LABEL = "probe (local evidence, not a proof)"

# independent random streams per check, so adding samples to one block
# never shifts the draws of another
STREAM_JETS, STREAM_Y0, STREAM_EQ_GUESS, STREAM_RESTARTS, STREAM_VARIETY = range(5)


def jet_names(m: int, levels: int) -> list[str]:
    return [f"y{i}_{j}" for i in range(levels) for j in range(1, m + 1)]


_JET_NAME = re.compile(r"y(\d+)_(\d+)$")


def parse_jet_name(name: str) -> tuple[int, int]:
    """``"y2_1"`` -> ``(2, 1)``."""
    match = _JET_NAME.match(name)
    if not match:
        raise ValueError(f"malformed jet variable {name!r}")
    return int(match.group(1)), int(match.group(2))


@dataclass(frozen=True)
class JetPoint:
    levels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.levels, dtype=float)
        if arr.ndim != 2:
            raise DimensionMismatch("jet levels must form an (r+2) x m array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("jet entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "levels", arr)

    @classmethod
    def from_vector(cls, vec, m: int) -> "JetPoint":
        return cls(np.asarray(vec, dtype=float).reshape(-1, m))

    @classmethod
    def equilibrium(cls, y0, r: int) -> "JetPoint":
        y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        levels = np.zeros((r + 2, y0.size))
        levels[0] = y0
        return cls(levels)

    @property
    def order(self) -> int:
        return self.levels.shape[0] - 1

    @property
    def vector(self) -> np.ndarray:
        return self.levels.reshape(-1)

    @property
    def head(self) -> np.ndarray:
        """Levels 0..r flattened: the arguments of phi."""
        return self.levels[:-1].reshape(-1)

    @property
    def shift(self) -> np.ndarray:
        """Levels 1..r+1 flattened: the Cartan shift direction."""
        return self.levels[1:].reshape(-1)

    def scaled_tail(self, factor: float) -> "JetPoint":
        levels = self.levels.copy()
        levels[1:] *= factor
        return JetPoint(levels)


@dataclass(frozen=True)
class ParameterFunction:
    """Candidate phi: R^(m(r+1)) -> R^n over the jet variables of levels 0..r.

    The top jet level ``r + 1`` is structurally absent from phi's inputs.
    """

    m: int
    n: int
    r: int
    phi: SmoothMap

    def __post_init__(self):
        if self.r < 0 or self.m <= 0:
            raise DimensionMismatch("need r >= 0 and m > 0")
        if self.phi.variables != tuple(jet_names(self.m, self.r + 1)):
            raise DimensionMismatch("phi must read the jet variables y0_1..y{r}_{m}")
        if self.phi.n_outputs != self.n:
            raise DimensionMismatch(f"phi needs n = {self.n} components, has {self.phi.n_outputs}")

    @classmethod
    def from_expressions(cls, exprs: Sequence[str], m: int, r: int) -> "ParameterFunction":
        return cls(m, len(exprs), r, SmoothMap(exprs, jet_names(m, r + 1)))

    @property
    def jet_size(self) -> int:
        return self.m * (self.r + 2)

    def jet(self, levels) -> JetPoint:
        jet = levels if isinstance(levels, JetPoint) else JetPoint(np.asarray(levels, dtype=float).reshape(self.r + 2, self.m))
        if jet.levels.shape != (self.r + 2, self.m):
            raise DimensionMismatch(f"jet must have shape {(self.r + 2, self.m)}, got {jet.levels.shape}")
        return jet

    def state(self, jet) -> np.ndarray:
        return self.phi.evaluate(self.jet(jet).head)

    def jacobians(self, jet) -> list[np.ndarray]:
        """``[dphi/dy_0, ..., dphi/dy_r]``, each n x m."""
        J = self.phi.jacobian(self.jet(jet).head)
        return [J[:, i * self.m : (i + 1) * self.m] for i in range(self.r + 1)]

    def shifted_jacobians(self, jet) -> list[np.ndarray]:
        """``L_tau(dphi/dy_i)`` for i = 0..r via nested forward differentiation."""
        jet = self.jet(jet)
        D = self.phi.directional_second(jet.head, jet.shift)
        return [D[:, i * self.m : (i + 1) * self.m] for i in range(self.r + 1)]


class Guard:
    """Predicate ``lhs OP rhs`` on jets (levels 0..r+1), e.g. ``y1_1^2 + y1_2^2 >= 0.01``."""

    _OPS = {">=": np.greater_equal, "<=": np.less_equal, ">": np.greater, "<": np.less}
    _SPLIT = re.compile(r"(>=|<=|>|<)")

    def __init__(self, text: str, m: int, r: int):
        parts = self._SPLIT.split(text)
        if len(parts) != 3:
            raise ExpressionSyntaxError("guard needs exactly one comparison (>=, <=, >, <)", text, 0, "comparison")
        lhs, op, rhs = parts
        ctx = jet_names(m, r + 2)
        self.text = text.strip()
        self.op = op
        self.lhs = SmoothMap([lhs], ctx)
        self.rhs = SmoothMap([rhs], ctx)

    def accepts(self, jet: JetPoint) -> bool:
        try:
            a = self.lhs.evaluate(jet.vector)[0]
            b = self.rhs.evaluate(jet.vector)[0]
        except DomainError:
            return False
        return bool(self._OPS[self.op](a, b))

    def __repr__(self) -> str:
        return f"Guard({self.text!r})"


@dataclass
class JetSampler:
    """Seeded Gaussian jets, optionally restricted by a :class:`Guard`."""

    n_samples: int = 100
    seed: int = 0
    scale: float = 1.0
    guard: Guard | None = None
    max_draws_factor: int = 1000
    rejected: int = field(default=0, init=False)

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def jets(self, pf: ParameterFunction) -> list[JetPoint]:
        rng = self.rng(STREAM_JETS)
        out: list[JetPoint] = []
        self.rejected = 0
        limit = self.n_samples * self.max_draws_factor
        for _ in range(limit):
            if len(out) == self.n_samples:
                break
            jet = JetPoint(rng.normal(0.0, self.scale, (pf.r + 2, pf.m)))
            if self.guard is None or self.guard.accepts(jet):
                out.append(jet)
            else:
                self.rejected += 1
        return out

    def equilibrium_inputs(self, m: int, count: int) -> np.ndarray:
        return self.rng(STREAM_Y0).normal(0.0, self.scale, (count, m))

    def region(self) -> str:
        return self.guard.text if self.guard is not None else "unrestricted"


# -- the operator L_tau and the map Phi --------------------------------------


def _lifted(pf: ParameterFunction, values: Sequence) -> tuple[list, list]:
    """Generic (phi, L_tau phi) from a flat jet of floats or duals."""
    k = pf.m * (pf.r + 1)
    head, shift = values[:k], values[pf.m :]
    tag = new_tag()
    inputs = [Dual(h, s, tag) for h, s in zip(head, shift)]
    outs = pf.phi.evaluate_generic(inputs)
    return [strip(o, tag) for o in outs], [tangent(o, tag) for o in outs]


def total_derivative(pf: ParameterFunction, jet) -> np.ndarray:
    """``sum_i dphi/dy_i * y_{i+1}``: one forward pass seeded with the shifted jet."""
    jet = pf.jet(jet)
    _, p = _lifted(pf, jet.vector.tolist())
    return np.array(p, dtype=float)


class PhiMap:
    """``Phi(y_0..y_{r+1}) = (phi, L_tau phi)`` as a map R^(m(r+2)) -> R^(2n)."""

    def __init__(self, pf: ParameterFunction):
        self.pf = pf

    @property
    def n_inputs(self) -> int:
        return self.pf.jet_size

    @property
    def n_outputs(self) -> int:
        return 2 * self.pf.n

    def evaluate(self, vec) -> np.ndarray:
        x, p = _lifted(self.pf, np.asarray(vec, dtype=float).reshape(-1).tolist())
        return np.array(x + p, dtype=float)

    def jacobian(self, vec) -> np.ndarray:
        vals = np.asarray(vec, dtype=float).reshape(-1).tolist()
        cols = []
        for k in range(len(vals)):
            tag = new_tag()
            seeded = list(vals)
            seeded[k] = Dual(vals[k], 1.0, tag)
            x, p = _lifted(self.pf, seeded)
            cols.append([tangent(v, tag) for v in x + p])
        return np.array(cols, dtype=float).T.reshape(self.n_outputs, len(vals))


def phi_big(pf: ParameterFunction, jet) -> tuple[np.ndarray, np.ndarray]:
    jet = pf.jet(jet)
    x, p = _lifted(pf, jet.vector.tolist())
    return np.array(x, dtype=float), np.array(p, dtype=float)


def pde_residual(sys: ImplicitSystem, pf: ParameterFunction, jet) -> np.ndarray:
    """``F(phi(y_0..y_r), L_tau phi(y_0..y_{r+1}))``."""
    _check_dims(sys, pf)
    x, p = phi_big(pf, jet)
    return sys.implicit(x, p)


def commutation_residuals(pf: ParameterFunction, jet) -> list[float]:
    """Frobenius norms of ``d/dy_i(L_tau phi) - L_tau(dphi/dy_i) - dphi/dy_{i-1}``, i = 0..r+1.

    The ``i = 0`` entry is the bracket ``[d/dy_0, L_tau]``, which has no
    lower-order term.
    """
    jet = pf.jet(jet)
    m, n, r = pf.m, pf.n, pf.r
    dPhi = PhiMap(pf).jacobian(jet.vector)
    dp = dPhi[n:]
    J = pf.jacobians(jet)
    LJ = pf.shifted_jacobians(jet)
    out = []
    for i in range(r + 2):
        block = dp[:, i * m : (i + 1) * m].copy()
        if i <= r:
            block -= LJ[i]
        if i >= 1:
            block -= J[i - 1]
        out.append(float(np.linalg.norm(block)))
    return out


def _check_dims(sys: ImplicitSystem, pf: ParameterFunction) -> None:
    if sys.n != pf.n or sys.m != pf.m:
        raise DimensionMismatch(f"system is (n={sys.n}, m={sys.m}) but phi is (n={pf.n}, m={pf.m})")


# -- checks ------------------------------------------------------------------

ILL_CONDITIONED = 1e6


def check_parameter_function(
    sys: ImplicitSystem,
    pf: ParameterFunction,
    sampler: JetSampler | None = None,
    tol: float = 1e-8,
) -> Block:
    """Pointwise PDE residual over sampled jets.

    Alongside the residual, the chart sensitivity ``max |dPhi|`` is recorded;
    roundoff in the residual scales with it, and samples above
    ``ILL_CONDITIONED`` are counted to flag jets close to a singularity.
    """
    _check_dims(sys, pf)
    sampler = sampler or JetSampler()
    jets = sampler.jets(pf)
    phi_map = PhiMap(pf)
    max_res, arg_max = 0.0, None
    max_sens, ill = 0.0, 0
    errors = []
    for k, jet in enumerate(jets):
        try:
            x, p = phi_big(pf, jet)
            res = float(np.linalg.norm(sys.implicit(x, p)))
            sens = float(np.abs(phi_map.jacobian(jet.vector)).max(initial=0.0))
        except DomainError as exc:
            errors.append({"sample": k, "cause": str(exc)})
            continue
        if res > max_res or arg_max is None:
            max_res, arg_max = max(res, max_res), k
        max_sens = max(max_sens, sens)
        ill += sens > ILL_CONDITIONED
    evidence = {
        "samples": len(jets),
        "seed": sampler.seed,
        "scale": sampler.scale,
        "region": sampler.region(),
        "rejected_by_guard": sampler.rejected,
        "tolerance": tol,
        "max_residual": max_res,
        "worst_sample": arg_max,
        "domain_errors": len(errors),
        "domain_error_samples": errors[:5],
        "max_sensitivity": max_sens,
        "ill_conditioned_samples": int(ill),
    }
    if len(jets) < sampler.n_samples:
        evidence["note"] = "guard rejected too many draws; fewer samples than requested"
    ok = not errors and max_res <= tol and len(jets) > 0
    if ok:
        verdict = f"max |F(phi, L phi)| = {max_res:.3e} <= {tol:.1e} on {len(jets)} jets ({sampler.region()})"
    elif errors:
        verdict = f"{len(errors)} domain error(s), first: {errors[0]['cause']}"
    elif not jets:
        verdict = "no admissible jets sampled"
    else:
        verdict = f"max |F(phi, L phi)| = {max_res:.3e} exceeds {tol:.1e}"
    return Block("pde", PASS if ok else FAIL, evidence=evidence, verdict=verdict)


@dataclass
class SubmersionSample:
    residual: float
    rank_dPhi: int
    rank_dphi: int
    passed: bool
    error: str | None = None


@dataclass
class SubmersionReport:
    samples: list[SubmersionSample]
    required_rank: int
    n: int
    region: str = "unrestricted"
    seed: int = 0

    @property
    def passed(self) -> bool:
        return bool(self.samples) and all(s.passed for s in self.samples)

    @property
    def dphi_rank_violations(self) -> int:
        return sum(s.error is None and s.rank_dphi < self.n for s in self.samples)

    def block(self) -> Block:
        ok = [s for s in self.samples if s.error is None]
        failed = [i for i, s in enumerate(self.samples) if not s.passed]
        evidence = {
            "samples": len(self.samples),
            "seed": self.seed,
            "region": self.region,
            "required_rank": self.required_rank,
            "ranks_dPhi": sorted({s.rank_dPhi for s in ok}),
            "max_variety_residual": max((s.residual for s in ok), default=0.0),
            "failed_samples": failed[:10],
            "domain_errors": sum(s.error is not None for s in self.samples),
        }
        if self.passed:
            verdict = f"rank dPhi = {self.required_rank} = n+m and Phi lands on F=0 at {len(self.samples)} jets"
        elif not self.samples:
            verdict = "no admissible jets sampled"
        else:
            verdict = f"{len(failed)} of {len(self.samples)} jets fail (rank dPhi or variety residual)"
        return Block("submersion", PASS if self.passed else FAIL, evidence=evidence, verdict=verdict)

    def dphi_block(self) -> Block:
        ok = [s for s in self.samples if s.error is None]
        good = bool(ok) and len(ok) == len(self.samples) and self.dphi_rank_violations == 0
        evidence = {"required_rank": self.n, "ranks_dphi": sorted({s.rank_dphi for s in ok}), "violations": self.dphi_rank_violations}
        if good:
            verdict = f"rank dphi = n = {self.n} at every jet"
        elif not ok:
            verdict = "no jets evaluated"
        else:
            verdict = f"dphi not surjective at {self.dphi_rank_violations} jet(s)"
        return Block("dphi-rank", PASS if good else FAIL, evidence=evidence, verdict=verdict)


def check_submersion(
    sys: ImplicitSystem,
    pf: ParameterFunction,
    sampler: JetSampler | None = None,
    tol_res: float = 1e-8,
    tol_rank: float = DEFAULT_TOL_REL,
) -> SubmersionReport:
    """Phi maps into F = 0 with rank dPhi = n + m; rank dphi = n is recorded."""
    _check_dims(sys, pf)
    sampler = sampler or JetSampler()
    phi_map = PhiMap(pf)
    need = pf.n + pf.m
    samples = []
    for jet in sampler.jets(pf):
        try:
            x, p = phi_big(pf, jet)
            res = float(np.linalg.norm(sys.implicit(x, p)))
            rank_big = svd_rank(phi_map.jacobian(jet.vector), tol_rank).rank
            rank_small = svd_rank(pf.phi.jacobian(jet.head), tol_rank).rank
        except DomainError as exc:
            samples.append(SubmersionSample(float("nan"), 0, 0, False, str(exc)))
            continue
        samples.append(SubmersionSample(res, rank_big, rank_small, res <= tol_res and rank_big == need))
    return SubmersionReport(samples, need, pf.n, sampler.region(), sampler.seed)


class EquilibriumChart:
    """``y_0 -> phi(y_0, 0, ..., 0)`` as a map R^m -> R^n."""

    def __init__(self, pf: ParameterFunction):
        self.pf = pf

    def _head(self, y0) -> np.ndarray:
        head = np.zeros(self.pf.m * (self.pf.r + 1))
        head[: self.pf.m] = y0
        return head

    def evaluate(self, y0) -> np.ndarray:
        return self.pf.phi.evaluate(self._head(y0))

    def jacobian(self, y0) -> np.ndarray:
        return self.pf.phi.jacobian(self._head(y0), columns=range(self.pf.m))


def check_equilibrium_map(
    sys: ImplicitSystem,
    pf: ParameterFunction,
    sampler: JetSampler | None = None,
    tol: float = 1e-8,
    n_points: int = 10,
    delta: float = 1e-3,
    tol_rank: float = DEFAULT_TOL_REL,
    tol_injective: float = 1e-6,
) -> Block:
    """Local evidence that ``y_0 -> phi(y_0, 0..0)`` is a diffeomorphism onto ``F(x, 0) = 0``.

    Checks image residual, rank m, a pairwise injectivity probe, and that
    equilibria located independently of phi can be reached by inverting the
    chart. Equilibrium jets outside the guard make the block inconclusive
    unless something already failed.
    """
    _check_dims(sys, pf)
    sampler = sampler or JetSampler()
    chart = EquilibriumChart(pf)
    y0s = sampler.equilibrium_inputs(pf.m, n_points)
    zero_p = np.zeros(pf.n)
    images, errors, ranks = [], [], set()
    max_res = 0.0
    guarded_out = 0
    for k, y0 in enumerate(y0s):
        if sampler.guard is not None and not sampler.guard.accepts(JetPoint.equilibrium(y0, pf.r)):
            guarded_out += 1
        try:
            x0 = chart.evaluate(y0)
            ranks.add(svd_rank(chart.jacobian(y0), tol_rank).rank)
            max_res = max(max_res, float(np.linalg.norm(sys.implicit(x0, zero_p))))
        except DomainError as exc:
            errors.append({"sample": k, "cause": str(exc)})
            continue
        images.append((y0, x0))

    min_ratio = float("inf")
    for (ya, xa), (yb, xb) in itertools.combinations(images, 2):
        dy = float(np.linalg.norm(ya - yb))
        if dy >= delta:
            min_ratio = min(min_ratio, float(np.linalg.norm(xa - xb)) / dy)

    # equilibria located from the dynamics alone, then reached through the chart
    reached, attempted = 0, 0
    if sys.f is not None and images:
        guesses = sampler.rng(STREAM_EQ_GUESS).normal(0.0, sampler.scale, (n_points, pf.n))
        for guess in guesses:
            try:
                eq = find_equilibrium(sys, guess)
            except (NoConvergence, DomainError):
                continue
            attempted += 1
            start = min(images, key=lambda yx: np.linalg.norm(yx[1] - eq.x))[0]
            try:
                sol = gauss_newton_solve(chart, eq.x, start, tol=tol)
            except DomainError:
                continue
            reached += sol.converged

    evidence = {
        "points": n_points,
        "seed": sampler.seed,
        "region": sampler.region(),
        "tolerance": tol,
        "max_equilibrium_residual": max_res,
        "ranks": sorted(ranks),
        "required_rank": pf.m,
        "min_separation_ratio": min_ratio,
        "inversion_reached": reached,
        "inversion_attempted": attempted,
        "domain_errors": len(errors),
        "domain_error_samples": errors[:5],
        "outside_guard": guarded_out,
        "note": "local evidence",
    }
    problems = []
    if errors:
        problems.append(f"DomainError at equilibrium jets: {errors[0]['cause']}")
    if images:
        if max_res > tol:
            problems.append(f"F(phi(y0,0..0), 0) = {max_res:.3e}")
        if ranks != {pf.m}:
            problems.append(f"chart rank {sorted(ranks)} != m = {pf.m}")
        if len(images) > 1 and not min_ratio > tol_injective:
            problems.append(f"injectivity probe: min separation ratio {min_ratio:.3e}")
        if attempted == 0 or reached < attempted:
            problems.append(f"inversion reached {reached}/{attempted} equilibria")
    if problems:
        return Block("equilibrium-map", FAIL, evidence=evidence, verdict="; ".join(problems))
    if guarded_out:
        return Block(
            "equilibrium-map",
            INCONCLUSIVE,
            evidence=evidence,
            verdict=f"{guarded_out} equilibrium jet(s) lie outside the guard region",
        )
    return Block(
        "equilibrium-map",
        PASS,
        evidence=evidence,
        verdict=f"rank {pf.m} chart into F(x,0)=0, injective and onto sampled equilibria (local evidence)",
    )


def surjectivity_probe(
    sys: ImplicitSystem,
    pf: ParameterFunction,
    variety: VarietySample,
    restarts: int = 5,
    tol: float = 1e-8,
    seed: int = 0,
    scale: float = 1.0,
) -> Block:
    """Try to invert Phi at each variety point from ``restarts`` seeded jets."""
    _check_dims(sys, pf)
    phi_map = PhiMap(pf)
    rng = np.random.default_rng([seed, STREAM_RESTARTS])
    hits = 0
    worst = 0.0
    for x, p, _ in variety:
        target = np.concatenate([x, p])
        best = float("inf")
        for init in rng.normal(0.0, scale, (restarts, pf.jet_size)):
            try:
                sol = gauss_newton_solve(phi_map, target, init, tol=tol)
            except DomainError:
                continue
            best = min(best, sol.residual)
            if sol.converged:
                break
        hits += best <= tol
        worst = max(worst, best)
    frac = hits / len(variety) if len(variety) else 0.0
    evidence = {
        "label": PROBE_LABEL,
        "targets": len(variety),
        "restarts": restarts,
        "success_fraction": frac,
        "worst_residual": worst,
        "tolerance": tol,
    }
    status = PASS if frac == 1.0 else FAIL
    return Block(
        "surjectivity-probe",
        status,
        mandatory=False,
        evidence=evidence,
        verdict=f"Phi inverted at {hits}/{len(variety)} variety points; {PROBE_LABEL}",
    )
