import numpy as np
import pytest

from app.core.errors import NonFiniteError, ParameterError, SignatureError
from app.services.operators import (
    AffineOperator,
    AffineSubspaceNormalCone,
    BallNormalCone,
    BoxNormalCone,
    GraphPoint,
    L1Subdifferential,
    ScaledIdentityOperator,
    ShiftedOperator,
    SquaredDistanceSubdifferential,
    ZeroOperator,
    graph_point,
    graph_residual,
    inverse_graph_residual,
    inverse_resolvent,
    resolvent,
)


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture
def catalog():
    """One instance of every catalog entry on R^3."""
    return [
        ZeroOperator(3),
        AffineOperator([[2.0, 1.0, 0.0], [-1.0, 1.0, 0.5], [0.0, -0.5, 0.0]], [1.0, -2.0, 0.5]),
        BoxNormalCone([0.0, -1.0, -np.inf], [1.0, 2.0, 0.5]),
        BoxNormalCone([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]),
        AffineSubspaceNormalCone([[1.0, 1.0, 1.0]], [1.0]),
        L1Subdifferential(3, 0.7),
        SquaredDistanceSubdifferential([1.0, -1.0, 2.0]),
        BallNormalCone([0.5, 0.0, -0.5], 1.5),
        ScaledIdentityOperator(3, 2.0),
        ShiftedOperator(L1Subdifferential(3, 1.0), shift=[1.0, 2.0, 3.0], offset=[0.5, 0.0, -0.5]),
    ]


def test_resolvent_examples():
    """Test closed-form resolvents on hand-checked inputs."""
    np.testing.assert_array_equal(resolvent(ZeroOperator(2), 7.0, np.array([3.0, -2.0])), [3.0, -2.0])
    np.testing.assert_array_equal(resolvent(BoxNormalCone([0.0], [1.0]), 1.0, np.array([-0.5])), [0.0])

    abs_subdiff = L1Subdifferential(1, 1.0)
    np.testing.assert_array_equal(resolvent(abs_subdiff, 1.0, np.array([3.0])), [2.0])
    np.testing.assert_array_equal(resolvent(abs_subdiff, 1.0, np.array([0.5])), [0.0])


def test_resolvent_rejects_bad_parameters():
    """Test that γ ≤ 0, wrong dimensions and non-finite inputs are refused."""
    op = ZeroOperator(2)
    with pytest.raises(ParameterError):
        op.resolvent(0.0, np.zeros(2))
    with pytest.raises(ParameterError):
        op.resolvent(-1.0, np.zeros(2))
    with pytest.raises(SignatureError):
        op.resolvent(1.0, np.zeros(3))
    with pytest.raises(NonFiniteError):
        op.resolvent(1.0, np.array([np.nan, 0.0]))


def test_graph_point_examples():
    """Test graph points built from one resolvent evaluation."""
    p = graph_point(ZeroOperator(1), 2.0, np.array([4.0]))
    np.testing.assert_array_equal(p.a, [4.0])
    np.testing.assert_array_equal(p.a_star, [0.0])

    p = graph_point(SquaredDistanceSubdifferential([0.0]), 1.0, np.array([2.0]))
    np.testing.assert_array_equal(p.a, [1.0])
    np.testing.assert_array_equal(p.a_star, [1.0])

    p = graph_point(BoxNormalCone([0.0], [1.0]), 1.0, np.array([2.0]))
    np.testing.assert_array_equal(p.a, [1.0])
    np.testing.assert_array_equal(p.a_star, [1.0])


def test_graph_residual_examples():
    """Test graph residuals of points on and off the graph."""
    off_graph = GraphPoint(a=np.array([1.0]), a_star=np.array([1.0]))
    assert graph_residual(ZeroOperator(1), 1.0, off_graph) == pytest.approx(1.0)

    on_graph = GraphPoint(a=np.array([0.0]), a_star=np.array([0.3]))
    assert graph_residual(L1Subdifferential(1, 1.0), 1.0, on_graph) == 0.0


def test_graph_residual_of_graph_points(rng, catalog):
    """Test that every constructed graph point is certified."""
    for op in catalog:
        for gamma in (0.1, 1.0, 3.0):
            for _ in range(20):
                p = graph_point(op, gamma, 3.0 * rng.standard_normal(op.dim))
                assert graph_residual(op, gamma, p) <= 1e-12


def test_inverse_resolvent_examples():
    """Test the Moreau evaluation of J_{γA⁻¹}."""
    identity = AffineOperator(np.eye(1))
    np.testing.assert_allclose(inverse_resolvent(identity, 1.0, np.array([2.0])), [1.0], atol=1e-15)
    np.testing.assert_allclose(
        inverse_resolvent(L1Subdifferential(1, 1.0), 1.0, np.array([0.4])), [0.4], atol=1e-15
    )


def test_moreau_decomposition(rng, catalog):
    """Test J_{γA}(w) + γ·J_{γ⁻¹A⁻¹}(w/γ) = w."""
    for op in catalog:
        for gamma in (0.25, 1.0, 4.0):
            for _ in range(50):
                w = 2.0 * rng.standard_normal(op.dim)
                total = op.resolvent(gamma, w) + gamma * inverse_resolvent(op, 1.0 / gamma, w / gamma)
                np.testing.assert_allclose(total, w, rtol=0, atol=1e-10)


def test_inverse_graph_residual_of_swapped_graph_points(rng, catalog):
    """Test that (a*, a) lies on the graph of A⁻¹ whenever (a, a*) lies on gra A."""
    for op in catalog:
        for _ in range(20):
            p = graph_point(op, 1.0, rng.standard_normal(op.dim))
            swapped = GraphPoint(a=p.a_star, a_star=p.a)
            assert inverse_graph_residual(op, 1.0, swapped) <= 1e-10


def test_firm_nonexpansiveness(rng, catalog):
    """Test ‖J(w₁) − J(w₂)‖² ≤ ⟨J(w₁) − J(w₂), w₁ − w₂⟩ on random pairs."""
    for op in catalog:
        w1 = 3.0 * rng.standard_normal((1000, op.dim))
        w2 = 3.0 * rng.standard_normal((1000, op.dim))
        d = op.resolvent(0.8, w1) - op.resolvent(0.8, w2)
        lhs = np.sum(d * d, axis=1)
        rhs = np.sum(d * (w1 - w2), axis=1)
        assert np.all(lhs <= rhs + 1e-10), op.tag


def test_batched_resolvent_matches_pointwise(rng, catalog):
    """Test that resolvents act row by row on stacked inputs."""
    for op in catalog:
        batch = rng.standard_normal((8, op.dim))
        out = op.resolvent(1.5, batch)
        assert out.shape == batch.shape
        for row, w in zip(out, batch):
            np.testing.assert_allclose(row, op.resolvent(1.5, w), rtol=1e-12, atol=1e-14)


def test_affine_resolvent_solves_linear_system(rng):
    """Test (I + γM) a = w − γc, including nonsymmetric monotone M."""
    M = np.array([[0.0, 1.0], [-1.0, 0.0]]) + 0.5 * np.eye(2)
    c = np.array([1.0, -1.0])
    op = AffineOperator(M, c)
    for gamma in (0.5, 2.0, 0.5):
        w = rng.standard_normal(2)
        a = op.resolvent(gamma, w)
        np.testing.assert_allclose((np.eye(2) + gamma * M) @ a, w - gamma * c, atol=1e-12)


def test_affine_operator_rejects_non_monotone():
    with pytest.raises(ParameterError):
        AffineOperator([[-1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SignatureError):
        AffineOperator([[1.0, 0.0]])


def test_box_validation():
    """Test that boxes need nonempty interior or must collapse to a point."""
    with pytest.raises(ParameterError):
        BoxNormalCone([1.0], [0.0])
    with pytest.raises(ParameterError):
        BoxNormalCone([0.0, 1.0], [1.0, 1.0])
    point = BoxNormalCone([2.0], [2.0])
    np.testing.assert_array_equal(point.resolvent(1.0, np.array([-5.0])), [2.0])


def test_affine_normal_cone_projects(rng):
    op = AffineSubspaceNormalCone([[1.0, 1.0]], [2.0])
    w = rng.standard_normal(2)
    a = op.resolvent(1.0, w)
    assert a.sum() == pytest.approx(2.0, abs=1e-12)
    # w − a is orthogonal to the subspace direction (1, −1)
    assert (w - a) @ np.array([1.0, -1.0]) == pytest.approx(0.0, abs=1e-12)

    with pytest.raises(ParameterError):
        AffineSubspaceNormalCone([[1.0, 1.0], [1.0, 1.0]], [0.0, 1.0])


def test_ball_projection():
    op = BallNormalCone([0.0, 0.0], 1.0)
    np.testing.assert_allclose(op.resolvent(1.0, np.array([3.0, 4.0])), [0.6, 0.8])
    np.testing.assert_array_equal(op.resolvent(1.0, np.array([0.1, -0.2])), [0.1, -0.2])
    with pytest.raises(ParameterError):
        BallNormalCone([0.0], 0.0)


def test_scaled_identity_kernel():
    op = ScaledIdentityOperator(2, 3.0)
    np.testing.assert_allclose(op.resolvent(0.5, np.array([5.0, -2.5])), [2.0, -1.0])
    with pytest.raises(ParameterError):
        ScaledIdentityOperator(1, 0.0)


def test_shifted_operator_identity(rng):
    """Test J of x ↦ A(x − s) + t against the closed form for A = Id."""
    s = np.array([1.0, -2.0])
    t = np.array([0.5, 0.25])
    op = ShiftedOperator(SquaredDistanceSubdifferential([0.0, 0.0]), shift=s, offset=t)
    for gamma in (0.5, 1.0, 2.0):
        w = rng.standard_normal(2)
        expected = (w + gamma * (s - t)) / (1.0 + gamma)
        np.testing.assert_allclose(op.resolvent(gamma, w), expected, atol=1e-14)


def test_affine_forms():
    """Test that affine entries and their shifts report (M, c)."""
    assert L1Subdifferential(2).affine_form() is None
    assert BoxNormalCone([0.0], [1.0]).affine_form() is None

    M, c = SquaredDistanceSubdifferential([1.0, 2.0]).affine_form()
    np.testing.assert_array_equal(M, np.eye(2))
    np.testing.assert_array_equal(c, [-1.0, -2.0])

    shifted = ShiftedOperator(ScaledIdentityOperator(1, 2.0), shift=[1.0], offset=[3.0])
    M, c = shifted.affine_form()
    np.testing.assert_array_equal(M, [[2.0]])
    np.testing.assert_array_equal(c, [1.0])


def test_descriptor_names_the_catalog_entry():
    descriptor = L1Subdifferential(2, 0.5).descriptor()
    assert descriptor == {"tag": "l1", "dim": 2, "weight": 0.5}


def test_coordinate_slices_resolve_like_the_whole(rng):
    """Test that each coordinate slice of a separable operator reproduces its resolvent entry."""
    separable = [
        ZeroOperator(3),
        AffineOperator(np.diag([1.0, 2.0, 0.5]), [0.1, -0.2, 0.3]),
        BoxNormalCone([0.0, -1.0, -np.inf], [1.0, 2.0, 0.0]),
        L1Subdifferential(3, 0.7),
        SquaredDistanceSubdifferential([1.0, -2.0, 0.5]),
        ScaledIdentityOperator(3, 2.0),
        ShiftedOperator(BoxNormalCone([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), shift=[1.0, 0.0, -1.0], offset=[0.5, 0.0, 0.0]),
    ]
    w = rng.standard_normal(3) * 3
    for op in separable:
        whole = op.resolvent(0.8, w)
        for i in range(3):
            piece = op.coordinate(i)
            assert piece.dim == 1
            np.testing.assert_allclose(piece.resolvent(0.8, w[i : i + 1]), whole[i : i + 1], atol=1e-12)


def test_coordinate_is_none_when_operator_couples():
    assert AffineOperator([[1.0, 0.5], [0.5, 1.0]]).coordinate(0) is None
    assert BallNormalCone([0.0, 0.0], 1.0).coordinate(1) is None
    assert ShiftedOperator(BallNormalCone([0.0, 0.0], 1.0)).coordinate(0) is None
    ball = BallNormalCone([0.5], 1.0)
    assert ball.coordinate(0) is ball
    with pytest.raises(SignatureError):
        BoxNormalCone([0.0], [1.0]).coordinate(1)
