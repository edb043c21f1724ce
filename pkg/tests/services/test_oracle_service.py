import numpy as np
import pytest

from app.core.errors import UnsupportedOracleError
from app.services.ktsolver import KTProblem, select_resolvent
from app.services.operators import BoxNormalCone, L1Subdifferential, SquaredDistanceSubdifferential
from app.services.oracle_service import oracle_project
from app.services.space import DenseMap, IdentityMap
from app.services.systems import ProductOperator
from tests.problems import interval_problem, interval_projection, random_affine_problem


def test_affine_oracle_finds_singleton():
    """Test that an SPD-affine problem projects every point onto its unique zero."""
    rng = np.random.default_rng(1)
    problem, x_bar, v_bar = random_affine_problem(rng, 3, 2)
    for _ in range(5):
        x, v = oracle_project(problem, rng.standard_normal(3), rng.standard_normal(2))
        np.testing.assert_allclose(x, x_bar, atol=1e-10)
        np.testing.assert_allclose(v, v_bar, atol=1e-10)


def test_affine_oracle_output_is_kuhn_tucker_point():
    rng = np.random.default_rng(2)
    problem, _, _ = random_affine_problem(rng, 2, 3)
    x, v = oracle_project(problem)
    assert select_resolvent(problem, x, v, 1.0, 1.0).tau <= 1e-18


def test_scalar_oracle_interval_problem():
    x, v = oracle_project(interval_problem(3.0, 0.5))
    np.testing.assert_allclose(x, [1.0], atol=1e-9)
    np.testing.assert_allclose(v, [0.0], atol=1e-9)


def test_scalar_oracle_fixes_points_of_z():
    problem = interval_problem()
    for v in (0.0, -0.5, -2.0):
        x_bar, v_bar = oracle_project(problem, [1.0], [v])
        np.testing.assert_allclose(x_bar, [1.0], atol=1e-9)
        np.testing.assert_allclose(v_bar, [v], atol=1e-9)


def test_scalar_oracle_is_idempotent():
    problem = interval_problem()
    rng = np.random.default_rng(6)
    for _ in range(10):
        once = oracle_project(problem, rng.uniform(-3, 3, 1), rng.uniform(-3, 3, 1))
        twice = oracle_project(problem, *once)
        np.testing.assert_allclose(twice[0], once[0], atol=1e-8)
        np.testing.assert_allclose(twice[1], once[1], atol=1e-8)


def test_scalar_oracle_needs_three_points():
    with pytest.raises(ValueError):
        oracle_project(interval_problem(), points=2)


def test_oracle_refuses_other_problems():
    problem = KTProblem(
        A=BoxNormalCone([0.0, 0.0], [1.0, 1.0]),
        B=L1Subdifferential(1),
        L=DenseMap([[1.0, 1.0]]),
        x0=[0.0, 0.0],
        v0=[0.0],
    )
    with pytest.raises(UnsupportedOracleError):
        oracle_project(problem)


def test_oracle_refuses_zero_coupling():
    problem = KTProblem(
        A=BoxNormalCone([0.0], [1.0]),
        B=BoxNormalCone([1.0], [2.0]),
        L=DenseMap([[0.0]]),
        x0=[0.0],
        v0=[0.0],
    )
    with pytest.raises(UnsupportedOracleError):
        oracle_project(problem)


def test_scalar_oracle_with_scaled_coupling():
    """Test 0 ∈ N_[0,1](x) + 2 N_[1,2](2x): Z = [0.5, 1] × {0}."""
    problem = KTProblem(
        A=BoxNormalCone([0.0], [1.0]),
        B=BoxNormalCone([1.0], [2.0]),
        L=DenseMap([[2.0]]),
        x0=[3.0],
        v0=[-1.0],
    )
    x, v = oracle_project(problem)
    np.testing.assert_allclose(x, [1.0], atol=1e-9)
    np.testing.assert_allclose(v, [0.0], atol=1e-9)


def test_scalar_oracle_widens_for_far_starts():
    """Test that a start far outside the first window still lands on {1} × (-inf, 0]."""
    for x0, v0 in ((30.0, 0.5), (-40.0, 25.0), (1.0, -500.0)):
        x, v = oracle_project(interval_problem(x0, v0))
        expected = interval_projection(x0, v0)
        np.testing.assert_allclose(x, [expected[0]], atol=1e-8)
        np.testing.assert_allclose(v, [expected[1]], atol=1e-8)


def test_scalar_oracle_singleton_between_grid_points():
    """Test 0 ∈ N_[0,1](x) + (x - 2): Z = {(1, -1)} even when no grid point hits it."""
    problem = KTProblem(
        A=BoxNormalCone([0.0], [1.0]),
        B=SquaredDistanceSubdifferential([2.0]),
        L=IdentityMap(1),
        x0=[0.3],
        v0=[0.1],
    )
    for points in (2001, 1000, 7):
        x, v = oracle_project(problem, points=points)
        np.testing.assert_allclose(x, [1.0], atol=1e-8)
        np.testing.assert_allclose(v, [-1.0], atol=1e-8)


def test_scalar_oracle_refuses_empty_set():
    problem = KTProblem(
        A=BoxNormalCone([0.0], [1.0]),
        B=BoxNormalCone([3.0], [4.0]),
        L=IdentityMap(1),
        x0=[0.0],
        v0=[0.0],
    )
    with pytest.raises(UnsupportedOracleError):
        oracle_project(problem)


def test_separable_oracle_projects_each_coordinate():
    """
    Coordinate 1 is the interval problem, Z_1 = {1} × (-inf, 0]; coordinate 2
    has ℓ = -1 and B = N_[-2,-1], Z_2 = {1} × [0, inf).
    """
    problem = KTProblem(
        A=BoxNormalCone([0.0, 0.0], [1.0, 1.0]),
        B=BoxNormalCone([1.0, -2.0], [2.0, -1.0]),
        L=DenseMap([[1.0, 0.0], [0.0, -1.0]]),
        x0=[3.0, -2.0],
        v0=[0.5, 2.0],
    )
    x, v = oracle_project(problem)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(v, [0.0, 2.0], atol=1e-8)


def test_separable_oracle_over_product_blocks():
    problem = KTProblem(
        A=ProductOperator([BoxNormalCone([0.0], [1.0]), L1Subdifferential(1)]),
        B=ProductOperator([BoxNormalCone([1.0], [2.0]), BoxNormalCone([-1.0], [1.0])]),
        L=IdentityMap(2),
        x0=[3.0, 0.0],
        v0=[0.5, 0.0],
    )
    x, v = oracle_project(problem)
    # second coordinate: 0 ∈ ∂|x| + N_[-1,1](x) holds at (0, 0)
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-8)
    np.testing.assert_allclose(v, [0.0, 0.0], atol=1e-8)


def test_oracle_refuses_coupled_two_dimensional_problem():
    problem = KTProblem(
        A=BoxNormalCone([0.0, 0.0], [1.0, 1.0]),
        B=BoxNormalCone([1.0, 1.0], [2.0, 2.0]),
        L=DenseMap([[1.0, 1.0], [0.0, 1.0]]),
        x0=[0.0, 0.0],
        v0=[0.0, 0.0],
    )
    with pytest.raises(UnsupportedOracleError):
        oracle_project(problem)
