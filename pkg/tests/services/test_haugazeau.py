import itertools

import numpy as np
import pytest

from app.core.errors import EmptyIntersectionError, SignatureError
from app.services.haugazeau import (
    HalfSpace,
    StoppingSpec,
    halfspace_contains,
    outer_step,
    project_q,
    q_scalars,
    run_outer_loop,
)
from app.services.space import BlockVec


def _qp_projection(x, y, z):
    """
    Brute-force projection of x onto H(x, y) ∩ H(y, z) by enumerating the
    active sets of the two constraints ⟨h, a_j⟩ ≤ b_j.
    """
    constraints = []
    for anchor, base in ((x, y), (y, z)):
        a = anchor - base
        if np.any(a != 0.0):
            constraints.append((a, float(a @ base)))

    def feasible(h):
        return all(a @ h <= b + 1e-9 * (1.0 + abs(b)) for a, b in constraints)

    best = None
    for size in range(len(constraints) + 1):
        for active in itertools.combinations(constraints, size):
            if not active:
                h = x.copy()
            else:
                G = np.array([a for a, _ in active])
                rhs = np.array([b for _, b in active]) - G @ x
                multipliers, *_ = np.linalg.lstsq(G @ G.T, rhs, rcond=None)
                h = x + G.T @ multipliers
                if not np.allclose(G @ h, [b for _, b in active], atol=1e-9):
                    continue
            if feasible(h) and (best is None or np.linalg.norm(h - x) < np.linalg.norm(best - x)):
                best = h
    return best


def test_halfspace_contains_examples():
    """Test half-space membership on the hand-checked examples."""
    origin = np.zeros(2)
    assert halfspace_contains(HalfSpace(origin, origin), np.array([7.0, -3.0]))

    hs = HalfSpace(origin, np.array([1.0, 0.0]))
    assert halfspace_contains(hs, np.array([2.0, 0.0]))
    assert not halfspace_contains(hs, np.array([0.0, 5.0]))
    assert HalfSpace(origin, origin).is_whole_space


def test_halfspace_contains_checks_signature():
    with pytest.raises(SignatureError):
        halfspace_contains(HalfSpace(np.zeros(2), np.ones(2)), np.zeros(3))


def test_q_scalars():
    s = q_scalars(np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([3.0, 1.0]))
    assert (s.q_chi, s.q_mu, s.q_nu, s.q_rho) == (2.0, 1.0, 5.0, 1.0)


def test_project_q_examples():
    """Test the three non-empty cases on hand-checked triplets."""
    np.testing.assert_array_equal(
        project_q(np.zeros(2), np.zeros(2), np.array([1.0, 1.0])), [1.0, 1.0]
    )
    np.testing.assert_allclose(
        project_q(np.zeros(2), np.array([1.0, 0.0]), np.array([3.0, 1.0])), [2.8, 1.4], atol=1e-15
    )
    np.testing.assert_allclose(
        project_q(np.zeros(2), np.array([1.0, 0.0]), np.array([1.0, 1.0])), [1.0, 1.0], atol=1e-15
    )


def test_project_q_empty_intersection():
    """Test that parallel, disjoint half-spaces raise with their scalars attached."""
    x = np.array([0.0])
    y = np.array([1.0])
    z = np.array([0.5])
    with pytest.raises(EmptyIntersectionError) as exc_info:
        project_q(x, y, z)
    scalars = exc_info.value.scalars
    assert scalars.q_rho == 0.0
    assert scalars.q_chi < 0.0
    assert "q_chi" in str(exc_info.value)


def test_project_q_matches_qp_oracle():
    """Test Q against the active-set projection on random triplets in dims 1-5."""
    rng = np.random.default_rng(2024)
    checked = 0
    for trial in range(1000):
        dim = 1 + trial % 5
        x, y, z = (rng.standard_normal(dim) for _ in range(3))
        expected = _qp_projection(x, y, z)
        if expected is None:
            with pytest.raises(EmptyIntersectionError):
                project_q(x, y, z)
            continue
        np.testing.assert_allclose(project_q(x, y, z), expected, rtol=0, atol=1e-9)
        checked += 1
    assert checked > 500


def test_project_q_keeps_block_representation():
    x = BlockVec(([0.0], [0.0]))
    y = BlockVec(([1.0], [0.0]))
    z = BlockVec(([3.0], [1.0]))
    result = project_q(x, y, z)
    assert isinstance(result, BlockVec)
    np.testing.assert_allclose(result.flat(), [2.8, 1.4], atol=1e-15)


def test_outer_step_degenerate_cases():
    """Test the stationary half-step and the first-step (x0 = x_n) cases."""
    x0 = np.array([1.0, 2.0])
    x_n = np.array([0.5, 0.5])
    np.testing.assert_array_equal(outer_step(x0, x_n, x_n), x_n)

    x_half = np.array([-1.0, 3.0])
    np.testing.assert_array_equal(outer_step(x0, x0, x_half), x_half)


def test_outer_loop_single_halfspace():
    """Test convergence to P_C x0 for C = {h₁ ≤ 0}."""

    def oracle(x):
        return np.array([min(x[0], 0.0), x[1]])

    x, trace = run_outer_loop(np.array([1.0, 0.0]), oracle, StoppingSpec(max_iters=50))
    np.testing.assert_array_equal(x, [0.0, 0.0])
    assert trace.status == "step_tolerance"
    assert trace.records[1].step_sq == 0.0


def test_outer_loop_identity_oracle():
    """Test that a stationary oracle stops at x0 after the patience window."""
    x0 = np.array([3.0, -1.0])
    x, trace = run_outer_loop(x0, lambda x: x, StoppingSpec(max_iters=100, patience=4))
    np.testing.assert_array_equal(x, x0)
    assert trace.iterations == 4
    assert trace.status == "step_tolerance"


def test_outer_loop_alternating_projections():
    """Test the alternating cuts onto {h₁ ≤ 0} and {h₂ ≤ 0} from (1, 1)."""
    x0 = np.array([1.0, 1.0])
    calls = {"n": 0}

    def oracle(x):
        axis = calls["n"] % 2
        calls["n"] += 1
        out = x.copy()
        out[axis] = min(out[axis], 0.0)
        return out

    x, trace = run_outer_loop(x0, oracle, StoppingSpec(max_iters=200))
    np.testing.assert_allclose(x, [0.0, 0.0], atol=1e-8)

    # Distance to x0 never decreases and never exceeds the distance to P_C x0
    target = np.linalg.norm(x0)
    distances = [r.start_distance for r in trace.records]
    assert all(b >= a - 1e-12 for a, b in zip(distances, distances[1:]))
    assert max(distances) <= target + 1e-9

    # Summability proxies stay below ‖x0 − P_C x0‖²
    assert sum(r.step_sq for r in trace.records) <= target**2 + 1e-6
    assert sum(r.half_step_sq for r in trace.records) <= target**2 + 1e-6


def test_outer_loop_containment():
    """Test that a known point of C lies in both half-spaces at every iteration."""
    center = np.array([2.0, -1.0])
    radius = 1.0
    known = center.copy()

    def oracle(x):
        d = x - center
        n = np.linalg.norm(d)
        return x if n <= radius else center + radius * d / n

    x0 = np.array([-3.0, 4.0])
    iterates = []

    def recording_oracle(x):
        half = oracle(x)
        iterates.append((x.copy(), half.copy()))
        return half

    x, _ = run_outer_loop(x0, recording_oracle, StoppingSpec(max_iters=100))
    for x_n, x_half in iterates:
        assert halfspace_contains(HalfSpace(x0, x_n), known, tol=1e-9)
        assert halfspace_contains(HalfSpace(x_n, x_half), known, tol=1e-9)

    expected = center + radius * (x0 - center) / np.linalg.norm(x0 - center)
    np.testing.assert_allclose(x, expected, atol=1e-8)
