import math

import numpy as np
import pytest

from flatcert.errors import ConsistencyFailure, DimensionMismatch, NoConvergence
from flatcert.numlin import null_space, svd_rank
from flatcert.system import ImplicitSystem, check_consistency, find_equilibrium, sample_variety


def test_double_integrator_consistent(double_integrator):
    block = check_consistency(double_integrator, n_samples=50, seed=1)
    assert block.passed
    assert block.evidence["max_F_residual"] == 0.0
    assert block.evidence["ranks_dF_dp"] == [1]
    assert block.evidence["ranks_df_du"] == [1]
    assert "injectiv" in block.evidence["note"]


def test_unicycle_consistent_at_100_samples(unicycle):
    block = check_consistency(unicycle, n_samples=100, seed=0)
    assert block.passed
    assert block.evidence["max_F_residual"] <= 1e-12


def test_broken_pair_raises_with_residual():
    sys = ImplicitSystem.from_expressions(2, 1, ["p1 - x2 - 0.05"], ["x2", "u1 + 0.1"])
    with pytest.raises(ConsistencyFailure) as info:
        check_consistency(sys, n_samples=5)
    assert info.value.residual == pytest.approx(0.05, abs=1e-12)
    assert info.value.sample == 0
    block = check_consistency(sys, n_samples=5, raise_on_failure=False)
    assert not block.passed


def test_degenerate_input_map_is_detected():
    # F(x, f(x, u)) = 0 forces Im df/du into Ker dF/dp, so the rank leg is what can fail
    bad = ImplicitSystem.from_expressions(2, 1, ["p1 - x2"], ["x2", "0*u1"])
    with pytest.raises(ConsistencyFailure) as info:
        check_consistency(bad, n_samples=3)
    assert "rank df/du" in info.value.check


def test_dimensions_validated():
    with pytest.raises(DimensionMismatch):
        ImplicitSystem.from_expressions(2, 1, ["p1 - x2", "p2"], ["x2", "u1"])
    with pytest.raises((DimensionMismatch, ValueError)):
        ImplicitSystem.from_expressions(2, 0, ["p1", "p2"], ["x2", "x1"])


def test_find_equilibrium_double_integrator(double_integrator):
    eq = find_equilibrium(double_integrator, [0.3, 0.5], [0.1])
    np.testing.assert_allclose(eq.x, [0.3, 0.0], atol=1e-12)
    np.testing.assert_allclose(eq.u, [0.0], atol=1e-12)
    assert eq.residual <= 1e-10


def test_find_equilibrium_pendulum(pendulum):
    eq = find_equilibrium(pendulum, [0.4, 0.2], [0.0])
    np.testing.assert_allclose(eq.x, [0.4, 0.0], atol=1e-12)
    assert eq.u[0] == pytest.approx(math.sin(0.4), abs=1e-10)
    assert np.linalg.norm(pendulum.implicit(eq.x, np.zeros(2))) <= 1e-8


def test_find_equilibrium_fixed_point(pendulum):
    eq = find_equilibrium(pendulum, [0.4, 0.0], [math.sin(0.4)])
    assert eq.iterations == 0
    np.testing.assert_array_equal(eq.x, [0.4, 0.0])


def test_find_equilibrium_no_convergence():
    sys = ImplicitSystem.from_expressions(1, 1, [], ["exp(x1) + u1^2"])
    with pytest.raises(NoConvergence):
        find_equilibrium(sys, [0.0], [0.0], max_iter=10)


def test_sample_variety_deterministic_and_exact(double_integrator, unicycle):
    a = sample_variety(double_integrator, 10, seed=3)
    b = sample_variety(double_integrator, 10, seed=3)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.p, b.p)
    assert len(a) == 10
    np.testing.assert_array_equal(a.p[:, 0], a.x[:, 1])
    uni = sample_variety(unicycle, 100, seed=0)
    assert uni.residuals.max() <= 1e-12


def test_variety_rank_and_duality(catalog):
    for spec in catalog.values():
        sys = spec.system
        for x, p, u in sample_variety(sys, 20, seed=4):
            _, Fp = sys.implicit_jacobians(x, p)
            _, fu = sys.explicit_jacobians(x, u)
            assert svd_rank(Fp).rank == sys.n - sys.m
            assert null_space(Fp).shape[1] == sys.m == svd_rank(fu).rank
