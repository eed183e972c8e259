import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from conftest import rot2
from rollkit.errors import BaseMismatch, InvalidState
from rollkit.manifold_core import TangentVector
from rollkit.ode import n_steps_for, rk4, rk4_pieces
from rollkit.state_space import (StatePoint, fiber_dim, isometry_residual, lifts, orthonormalize,
                                 q_dim, transpose_state, validate_state, vertical_basis,
                                 vertical_part, vertical_tangent)
from rollkit.zoo import make_manifold

angles = st.floats(-math.pi, math.pi)


def stiefel_dim(n, N):
    """Dimension of isometric injections R^n -> R^N, counted as O(N)/O(N-n)."""
    return N * (N - 1) // 2 - (N - n) * (N - n - 1) // 2


@pytest.mark.parametrize("n,nh", [(2, 2), (3, 3), (2, 3), (3, 2), (1, 3), (4, 2)])
def test_fiber_dimension(n, nh):
    expected = stiefel_dim(min(n, nh), max(n, nh))
    assert fiber_dim(n, nh) == expected
    assert q_dim(n, nh) == n + nh + expected


@pytest.mark.parametrize("n,nh", [(2, 2), (2, 3), (3, 2)])
def test_vertical_basis_spans_the_fiber(n, nh):
    M = make_manifold({"kind": "euclidean", "n": n})
    Mh = make_manifold({"kind": "euclidean", "n": nh})
    A = np.eye(nh, n)
    q = StatePoint(np.zeros(n), np.zeros(nh), A)
    B = vertical_basis(M, Mh, q)
    assert len(B) == fiber_dim(n, nh)
    flat = np.array([b.ravel() for b in B])
    assert np.linalg.matrix_rank(flat) == len(B)
    # each direction is tangent to the isometry condition
    for b in B:
        if n <= nh:
            assert np.allclose(b.T @ A + A.T @ b, 0.0)
        else:
            assert np.allclose(b @ A.T + A @ b.T, 0.0)


def test_validation(sphere, plane):
    q = StatePoint([1.0, 0.5], [0.0, 0.0], rot2(0.3))
    assert validate_state(sphere, plane, q).ok
    bad = StatePoint([1.0, 0.5], [0.0, 0.0], 1.1 * rot2(0.3))
    assert not validate_state(sphere, plane, bad).ok
    flip = StatePoint([1.0, 0.5], [0.0, 0.0], np.diag([1.0, -1.0]))
    v = validate_state(sphere, plane, flip)
    assert v.isometry_residual < 1e-15 and not v.orientation_ok
    with pytest.raises(InvalidState):
        StatePoint([1.0, 0.5], [0.0, 0.0], np.eye(3))


@settings(max_examples=40)
@given(angles, st.floats(0.3, 2.8), st.floats(-3, 3))
def test_chart_and_frame_views_round_trip(a, r, th):
    S = make_manifold({"kind": "space_form", "n": 2, "k": 1.0})
    P = make_manifold({"kind": "euclidean", "n": 2})
    q = StatePoint([r, th], [0.2, -0.1], rot2(a))
    qc = q.in_charts(S, P)
    assert validate_state(S, P, qc).ok
    assert np.allclose(qc.in_frames(S, P).A, q.A, atol=1e-12)
    assert np.allclose(StatePoint.from_dict(qc.to_dict()).A, qc.A)


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_transpose_state_is_an_involution(seed):
    S3 = make_manifold({"kind": "space_form", "n": 3, "k": 1.0})
    E3 = make_manifold({"kind": "euclidean", "n": 3})
    A = special_ortho_group.rvs(3, random_state=seed)
    q = StatePoint([0.1, 0.2, -0.1], [1.0, 2.0, 3.0], A).in_charts(S3, E3)
    t = transpose_state(S3, E3, q)
    assert validate_state(E3, S3, t).ok
    back = transpose_state(E3, S3, t)
    assert np.allclose(back.A, q.A, atol=1e-12)


@settings(max_examples=30)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_orthonormalize_gives_isometric_injection(vals):
    A = np.array(vals).reshape(3, 2) + np.eye(3, 2) * 3
    U = orthonormalize(A)
    assert isometry_residual(U) < 1e-12
    W = orthonormalize(A.T)
    assert isometry_residual(W) < 1e-12


def test_lifts(sphere, plane):
    q = StatePoint([1.0, 0.5], [0.0, 0.0], rot2(0.4))
    v = TangentVector(q.x, [0.3, 0.2], "frame")
    xi = lifts(sphere, plane, q, v)
    assert np.allclose(xi.v_hat.components, rot2(0.4) @ [0.3, 0.2])
    # the lift has no vertical part; a pure fibre direction is all vertical
    assert np.allclose(vertical_part(sphere, plane, q, xi), 0.0)
    K = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(vertical_part(sphere, plane, q, vertical_tangent(sphere, plane, q, rot2(0.4) @ K)),
                       rot2(0.4) @ K)
    with pytest.raises(BaseMismatch):
        lifts(sphere, plane, q, TangentVector([1.1, 0.5], [1.0, 0.0]))


def test_rk4_is_fourth_order():
    errs = []
    for n in (10, 20, 40):
        ts, ys = rk4(lambda t, y: -y, np.array([1.0]), 0.0, 1.0, n)
        errs.append(abs(ys[-1, 0] - math.exp(-1)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4, abs=0.2)
    assert math.log2(errs[1] / errs[2]) == pytest.approx(4, abs=0.2)


def test_rk4_pieces_restarts_at_each_piece():
    class P:
        def __init__(self, d, rate):
            self.duration = d
            self.rate = rate

    ts, ys, starts = rk4_pieces([(0.0, P(1.0, 1.0)), (1.0, P(0.5, -2.0))],
                                lambda p: (lambda t, y: p.rate * y), np.array([1.0]), 0.01)
    assert starts[0] == 0 and ts[starts[1]] == pytest.approx(1.0)
    assert ys[-1, 0] == pytest.approx(math.exp(1.0 - 1.0), rel=1e-8)
    assert n_steps_for(1.0, 0.3) == 4
