"""Run the full battery of checks on a spec and assemble the report."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .controllability import (
    chain_block,
    check_chain_inclusions,
    check_equilibrium_identities,
    check_structure_identities,
    kalman_block,
    kalman_rank,
    linearize,
)
from .errors import ConsistencyFailure, DomainError, FlatcertError, MismatchedEquilibrium
from .jets import (
    STREAM_EQ_GUESS,
    STREAM_VARIETY,
    EquilibriumChart,
    JetSampler,
    check_equilibrium_map,
    check_parameter_function,
    check_submersion,
    surjectivity_probe,
)
from .planner import fit_flat_path, recover_inputs, roundtrip_check, synthesize_trajectory
from .report import FAIL, PASS, Block, CheckReport
from .specfile import CheckOptions, SpecFile
from .system import check_consistency, find_equilibrium, sample_variety


def _chain(spec: SpecFile, sampler: JetSampler, opts: CheckOptions) -> Block:
    sys, pf = spec.system, spec.flat
    chart = EquilibriumChart(pf)
    reports, errors = [], []
    for k, y0 in enumerate(sampler.equilibrium_inputs(pf.m, opts.eq_points)):
        try:
            eq = find_equilibrium(sys, chart.evaluate(y0))
            reports.append(check_chain_inclusions(sys, pf, eq, y0, opts.tol_inclusion, opts.tol_rank))
        except MismatchedEquilibrium as exc:
            errors.append({"sample": k, "cause": f"MismatchedEquilibrium: {exc}", "stacked_rank": exc.stacked_rank})
        except (FlatcertError, ArithmeticError) as exc:
            errors.append({"sample": k, "cause": f"{type(exc).__name__}: {exc}"})
    return chain_block(reports, errors, sys.n)


def _kalman(spec: SpecFile, sampler: JetSampler, opts: CheckOptions) -> Block:
    sys = spec.system
    ranks, errors = [], []
    guesses = sampler.rng(STREAM_EQ_GUESS).normal(0.0, sampler.scale, (opts.eq_points, sys.n))
    for k, guess in enumerate(guesses):
        try:
            eq = find_equilibrium(sys, guess)
            ranks.append(kalman_rank(linearize(sys, eq, tol_rel=opts.tol_rank), opts.tol_rank).rank)
        except (FlatcertError, ArithmeticError) as exc:
            errors.append({"sample": k, "cause": f"{type(exc).__name__}: {exc}"})
    return kalman_block(ranks, sys.n, errors)


def _probe(spec: SpecFile, opts: CheckOptions) -> Block:
    try:
        variety = sample_variety(spec.system, opts.probe_targets, seed=hash_seed(opts.seed, STREAM_VARIETY), scale=opts.scale)
    except (ConsistencyFailure, DomainError) as exc:
        return Block("surjectivity-probe", FAIL, False, {"error": str(exc)}, f"could not sample the variety: {exc}")
    return surjectivity_probe(spec.system, spec.flat, variety, opts.probe_restarts, opts.tol, opts.seed, opts.scale)


def hash_seed(seed: int, stream: int) -> int:
    """Deterministic child seed for a numbered stream."""
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def plan_blocks(spec: SpecFile) -> list[Block]:
    """Informative planning blocks (only when the spec has a [plan] section)."""
    if spec.plan is None:
        return []
    traj, block = run_plan(spec)
    out = [replace(block, mandatory=False)]
    if spec.psi is not None:
        out.append(roundtrip_check(spec.psi, spec.psi_order, traj))
    return out


def run_plan(spec: SpecFile, T: float | None = None, grid: int | None = None):
    """Fit, synthesize, recover inputs; returns ``(trajectory, plan block)``."""
    plan = spec.plan
    if plan is None:
        raise FlatcertError(f"spec {spec.name!r} has no [plan] section")
    horizon = plan.T if T is None else T
    grid_n = plan.grid if grid is None else grid
    path = fit_flat_path(plan.start, plan.end, horizon, plan.degree)
    traj = synthesize_trajectory(spec.system, spec.flat, path, grid_n, spec.guard)
    traj = recover_inputs(spec.system, traj)
    max_res = traj.max_residual
    ok = max_res <= plan.tol and traj.all_inputs_recovered
    evidence = {
        "T": horizon,
        "degree": path.degree,
        "nodes": len(traj.t),
        "max_residual": max_res,
        "tolerance": plan.tol,
        "inputs_recovered": traj.all_inputs_recovered,
        "node_status": {s: traj.status.count(s) for s in sorted(set(traj.status))},
        "u_start": traj.u[0],
        "u_end": traj.u[-1],
    }
    if ok:
        verdict = f"max |F(x, xdot)| = {max_res:.3e} on {len(traj.t)} nodes; inputs recovered"
    else:
        verdict = f"max |F(x, xdot)| = {max_res:.3e}, inputs recovered: {traj.all_inputs_recovered}"
    return traj, Block("plan", PASS if ok else FAIL, True, evidence, verdict)


def run_check(spec: SpecFile, options: CheckOptions | None = None) -> CheckReport:
    """Consistency, pde, submersion, equilibrium map, identities, chain, Kalman, probes."""
    opts = options or spec.check
    sys, pf = spec.system, spec.flat
    sampler = JetSampler(opts.samples, opts.seed, opts.scale, spec.guard)
    blocks = [
        check_consistency(sys, opts.samples, hash_seed(opts.seed, 99), opts.tol_consistency, opts.scale, opts.tol_rank, raise_on_failure=False),
        check_parameter_function(sys, pf, sampler, opts.tol),
    ]
    sub = check_submersion(sys, pf, sampler, opts.tol, opts.tol_rank)
    blocks += [sub.block(), sub.dphi_block()]
    blocks.append(check_equilibrium_map(sys, pf, sampler, opts.tol, opts.eq_points, tol_rank=opts.tol_rank))
    blocks.append(check_equilibrium_identities(sys, pf, sampler.equilibrium_inputs(pf.m, opts.eq_points), opts.tol_identity))
    blocks.append(_chain(spec, sampler, opts))
    blocks.append(_kalman(spec, sampler, opts))
    blocks.append(check_structure_identities(sys, pf, sampler.jets(pf), opts.tol))
    blocks.append(_probe(spec, opts))
    blocks += plan_blocks(spec)
    meta = {
        "system": sys.name,
        "spec_sha256": spec.sha256,
        "seed": opts.seed,
        "n": sys.n,
        "m": sys.m,
        "r": pf.r,
        "region": sampler.region(),
        "options": options_dict_from(opts),
    }
    return CheckReport(blocks, meta)


def options_dict_from(opts: CheckOptions) -> dict:
    return {k: getattr(opts, k) for k in sorted(vars(opts))}
