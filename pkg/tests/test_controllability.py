import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatcert.controllability import (
    Linearization,
    check_chain_inclusions,
    check_equilibrium_identities,
    check_structure_identities,
    generated_rank,
    equilibrium_identity_residuals,
    kalman_rank,
    krylov_matrix,
    linearize,
    structure_identity_residuals,
)
from flatcert.errors import DomainError, InvariantViolation, MismatchedEquilibrium
from flatcert.jets import JetPoint, JetSampler, ParameterFunction
from flatcert.system import EquilibriumPoint, ImplicitSystem, find_equilibrium



def eq(x, u):
    return EquilibriumPoint(np.asarray(x, float), np.asarray(u, float), 0.0, 0)


def test_linearize_double_integrator(double_integrator):
    lin = linearize(double_integrator, eq([0, 0], [0]))
    np.testing.assert_array_equal(lin.A, [[0, 1], [0, 0]])
    np.testing.assert_array_equal(lin.B, [[0], [1]])


def test_linearize_pendulum(pendulum):
    lin = linearize(pendulum, eq([0, 0], [0]))
    np.testing.assert_array_equal(lin.A, [[0, 1], [-1, 0]])
    lin = linearize(pendulum, find_equilibrium(pendulum, [0.4, 0.0]))
    np.testing.assert_allclose(lin.A, [[0, 1], [-math.cos(0.4), 0]], atol=1e-15)
    np.testing.assert_array_equal(lin.B, [[0], [1]])


def test_linearize_rejects_inconsistent_pair():
    # F claims xdot1 = 2 x2 while f says xdot1 = x2
    sys = ImplicitSystem.from_expressions(2, 1, ["p1 - 2*x2"], ["x2", "u1"])
    with pytest.raises(InvariantViolation):
        linearize(sys, eq([0, 0], [0]))


def test_linearize_requires_equilibrium(double_integrator):
    with pytest.raises(ValueError):
        linearize(double_integrator, EquilibriumPoint(np.zeros(2), np.ones(1), 1.0, 0))


def test_kalman_examples(double_integrator, pendulum):
    lin = linearize(double_integrator, eq([0, 0], [0]))
    np.testing.assert_array_equal(krylov_matrix(lin.A, lin.B, 2), [[0, 1], [1, 0]])
    assert kalman_rank(lin).rank == 2
    for point in (eq([0, 0], [0]), eq([0.4, 0], [math.sin(0.4)])):
        assert kalman_rank(linearize(pendulum, point)).rank == 2
    assert kalman_rank(Linearization(np.eye(2), np.array([[1.0], [0.0]]))).rank == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**31 - 1), st.booleans())
def test_kalman_rank_similarity_invariant(n, m, seed, degenerate):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    if degenerate:
        # block-triangular pair with an unreachable last coordinate
        A[-1, :-1] = 0.0
        B[-1] = 0.0
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    T = U @ np.diag(rng.uniform(0.5, 2.0, n))
    Ti = np.linalg.inv(T)
    base = kalman_rank(Linearization(A, B)).rank
    assert kalman_rank(Linearization(T @ A @ Ti, T @ B)).rank == base
    if degenerate:
        assert base < n


def test_structure_identities_double_integrator(double_integrator, di_phi, rng):
    for levels in rng.normal(size=(10, 3, 1)):
        res = structure_identity_residuals(double_integrator, di_phi, levels)
        assert res == {"i": 0.0, "ii": [0.0], "iii": 0.0}


def test_structure_identities_unicycle_guarded(catalog):
    spec = catalog["unicycle"]
    jets = JetSampler(50, guard=spec.guard).jets(spec.flat)
    block = check_structure_identities(spec.system, spec.flat, jets)
    assert block.passed and not block.mandatory
    assert block.evidence["max_residual"] <= 1e-8


def test_structure_identities_broken_phi(double_integrator):
    broken = ParameterFunction.from_expressions(["y0_1", "2*y1_1"], m=1, r=1)
    res = structure_identity_residuals(double_integrator, broken, np.array([[0.2], [0.5], [-0.3]]))
    assert res["ii"] == [1.0]


def test_equilibrium_identities_examples(double_integrator, di_phi, catalog):
    assert equilibrium_identity_residuals(double_integrator, di_phi, [0.3]) == {"i": 0.0, "ii": [0.0], "iii": 0.0}
    pmp = catalog["planar_mass_point"]
    assert check_equilibrium_identities(pmp.system, pmp.flat, np.random.default_rng(0).normal(size=(10, 2))).evidence["max_residual"] == 0.0
    pend = catalog["pendulum"]
    assert check_equilibrium_identities(pend.system, pend.flat, [0.4]).evidence["max_residual"] <= 1e-12


def test_equilibrium_identities_unicycle_domain_error(catalog):
    uni = catalog["unicycle"]
    block = check_equilibrium_identities(uni.system, uni.flat, [[0.3, -0.2]])
    assert block.status == "fail" and block.mandatory
    assert block.evidence["domain_errors"] == 1


def test_equilibrium_specialisation_matches_general_path(catalog, rng):
    for name in ("double_integrator", "pendulum", "planar_mass_point"):
        spec = catalog[name]
        for y0 in rng.normal(size=(5, spec.flat.m)):
            general = structure_identity_residuals(spec.system, spec.flat, JetPoint.equilibrium(y0, spec.flat.r))
            special = equilibrium_identity_residuals(spec.system, spec.flat, y0)
            assert abs(general["i"] - special["i"]) <= 1e-12
            assert abs(general["iii"] - special["iii"]) <= 1e-12
            np.testing.assert_allclose(general["ii"], special["ii"], atol=1e-12)


def test_structure_identities_follow_from_pde(catalog):
    for spec in catalog.values():
        if spec.name == "broken_phi_fixture":
            continue
        jets = JetSampler(20, seed=5, guard=spec.guard).jets(spec.flat)
        assert check_structure_identities(spec.system, spec.flat, jets, tol=1e-7).passed


def test_chain_double_integrator(double_integrator, di_phi):
    report = check_chain_inclusions(double_integrator, di_phi, eq([0.3, 0], [0]), [0.3])
    assert report.inclusion_residuals == {1: 0.0, 0: 0.0}
    assert report.stacked_rank == 2 and report.kalman_rank == 2 and report.passed


def test_chain_planar_mass_point(catalog):
    spec = catalog["planar_mass_point"]
    y0 = np.array([0.5, -1.0])
    report = check_chain_inclusions(spec.system, spec.flat, eq([0.5, -1.0, 0, 0], [0, 0]), y0)
    assert report.passed and report.stacked_rank == 4


def test_chain_defective_phi(defective_spec):
    sys, pf = defective_spec.system, defective_spec.flat
    assert generated_rank(pf, [0.3]) == 1
    # phi(0.3, 0) = (0.3, 0.3) is not even an equilibrium; the rank still travels with the error
    point = find_equilibrium(sys, [0.3, 0.3])
    with pytest.raises(MismatchedEquilibrium) as info:
        check_chain_inclusions(sys, pf, point, [0.3])
    assert info.value.stacked_rank == 1


def test_chain_mismatched_equilibrium(double_integrator, di_phi):
    with pytest.raises(MismatchedEquilibrium):
        check_chain_inclusions(double_integrator, di_phi, eq([0.0, 0], [0]), [0.3])


def test_chain_truncates_powers_beyond_n():
    # r = 3 on a 2-state system: Krylov spans stop at A B
    sys = ImplicitSystem.from_expressions(2, 1, ["p1 - x2"], ["x2", "u1"])
    pf = ParameterFunction.from_expressions(["y0_1 + y3_1*0", "y1_1"], m=1, r=3)
    report = check_chain_inclusions(sys, pf, eq([0.1, 0], [0]), [0.1])
    assert set(report.inclusion_residuals) == {0, 1, 2, 3}
    assert report.passed


def test_chain_pass_implies_kalman(catalog):
    for spec in catalog.values():
        for y0 in np.random.default_rng(1).normal(size=(5, spec.flat.m)):
            try:
                x0 = spec.flat.state(JetPoint.equilibrium(y0, spec.flat.r))
                point = find_equilibrium(spec.system, x0)
                report = check_chain_inclusions(spec.system, spec.flat, point, y0)
            except (DomainError, MismatchedEquilibrium):
                continue
            if report.passed:
                assert report.kalman_rank == spec.system.n
