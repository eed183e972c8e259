import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rot2
from rollkit.dynamics import (ControlPath, SEElement, anti_develop, cartan_map, codim1_lift_project,
                              equivariance_error, geodesic_curve, integrate_rolling, random_curve,
                              roll_geodesic, roll_onto_flat, transpose_duality_error)
from rollkit.errors import (BaseMismatch, DimMismatch, InvalidState, LoopNotClosed, NotFlatTarget,
                            OutOfChart)
from rollkit.manifold_core import Curve, transport_matrices
from rollkit.state_space import StatePoint
from rollkit.zoo import make_manifold


def latitude(r, turns=1.0):
    return Curve(lambda t: np.array([r, t]), lambda t: np.array([0.0, 1.0]), 2 * math.pi * turns)


def circumradius(p, q, s):
    a, b, c = np.linalg.norm(q - s), np.linalg.norm(p - s), np.linalg.norm(p - q)
    area = abs((q - p)[0] * (s - p)[1] - (q - p)[1] * (s - p)[0]) / 2
    return a * b * c / (4 * area)


def test_latitude_develops_onto_circle_of_radius_tan_r(sphere, plane):
    # the tangent cone along the latitude unrolls into a disc of radius tan r
    r = 0.6
    q0 = StatePoint([r, 0.0], [0.0, 0.0], np.eye(2))
    traj = integrate_rolling(sphere, plane, q0, ControlPath(latitude(r, 0.5)), 1e-3)
    pts = traj.xhats
    k = len(pts)
    R = circumradius(pts[0], pts[k // 2], pts[-1])
    assert R == pytest.approx(math.tan(r), abs=1e-9)
    # arc length on the plane equals arc length on the sphere
    assert np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)) == pytest.approx(math.pi * math.sin(r), abs=1e-6)


def test_great_circle_rolls_onto_a_straight_segment(sphere, plane):
    x0 = np.array([1.0, 0.3])
    c = geodesic_curve(sphere, x0, np.array([0.6, 0.8]), 2.0)
    q0 = StatePoint(x0, [0.0, 0.0], rot2(0.4))
    traj = integrate_rolling(sphere, plane, q0, ControlPath(c), 1e-3)
    d = traj.xhats[-1] - traj.xhats[0]
    speed = math.hypot(0.6, 0.8 * math.sin(1.0))
    assert np.linalg.norm(d) == pytest.approx(2.0 * speed, abs=1e-8)
    # every sample on the segment
    u = d / np.linalg.norm(d)
    off = traj.xhats - traj.xhats[0]
    assert np.max(np.abs(off[:, 0] * u[1] - off[:, 1] * u[0])) < 1e-9


def test_ode_agrees_with_flat_closed_form(sphere, plane):
    c = random_curve(sphere, [1.2, 0.1], [0.4, 0.8], 3.0, seed=4)
    q0 = StatePoint(c.position(0), [0.5, 0.5], rot2(1.1))
    t1 = integrate_rolling(sphere, plane, q0, ControlPath(c), 1e-3)
    t2, rho = roll_onto_flat(sphere, plane, q0, c, 1e-3)
    assert rho is None
    assert np.max(np.abs(t1.xhats - t2.xhats)) < 1e-9
    assert np.max(np.abs(t1.As - t2.As)) < 1e-9


def test_ns_mode_with_fixed_target_point_is_pure_transport(sphere, plane):
    c = random_curve(sphere, [1.2, 0.1], [0.4, 0.8], 2.0, seed=9)
    fixed = Curve.constant([0.3, 0.3], c.duration)
    q0 = StatePoint(c.position(0), [0.3, 0.3], rot2(0.2))
    traj = integrate_rolling(sphere, plane, q0, ControlPath(c, fixed, "NS"), 1e-3)
    P = transport_matrices(sphere, c, 1e-3)
    assert np.allclose(traj.As[-1], rot2(0.2) @ np.linalg.inv(P), atol=1e-10)
    assert traj.max_residual("nospin_defect") < 1e-8
    assert traj.max_residual("noslip_defect") > 0.1


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 1000), st.floats(-math.pi, math.pi))
def test_rolling_keeps_state_in_Q_and_satisfies_constraints(seed, a):
    S1 = make_manifold({"kind": "space_form", "n": 2, "k": 1.0})
    S2 = make_manifold({"kind": "space_form", "n": 2, "k": 2.0})
    c = random_curve(S1, [1.3, 0.0], [0.5, 1.0], 2.0, seed=seed)
    q0 = StatePoint(c.position(0), [1.0, 0.5], rot2(a))
    traj = integrate_rolling(S1, S2, q0, ControlPath(c), 2e-3)
    assert traj.max_residual("isometry_defect") < 1e-9
    assert traj.max_residual("noslip_defect") < 1e-7
    assert traj.max_residual("nospin_defect") < 1e-6
    assert all(np.linalg.det(A) > 0 for A in traj.As)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 1000))
def test_unequal_dimensions_keep_injection(seed):
    S = make_manifold({"kind": "space_form", "n": 2, "k": 1.0})
    E3 = make_manifold({"kind": "euclidean", "n": 3})
    c = random_curve(S, [1.3, 0.0], [0.5, 1.0], 2.0, seed=seed)
    q0 = StatePoint(c.position(0), [0.0, 0.0, 0.0], np.eye(3, 2))
    traj = integrate_rolling(S, E3, q0, ControlPath(c), 2e-3)
    assert traj.max_residual("isometry_defect") < 1e-9
    # x^ moves at the speed of x
    v = np.linalg.norm(np.diff(traj.xhats, axis=0), axis=1).sum()
    assert v == pytest.approx(2.0, abs=1e-5)


def test_anti_development_of_flat_curve_is_the_curve(plane):
    c = Curve(lambda t: np.array([t, t * t]), lambda t: np.array([1.0, 2 * t]), 1.0)
    ad = anti_develop(plane, c)
    assert np.allclose(ad.points[-1], [1.0, 1.0], atol=1e-12)


def test_flat_rho_of_latitude(sphere, plane):
    r = math.pi / 4
    q0 = StatePoint([r, 0.0], [0.0, 0.0], np.eye(2))
    _, rho = roll_onto_flat(sphere, plane, q0, latitude(r), 1e-3, require_loop=True)
    expected = math.remainder(2 * math.pi * math.cos(r), 2 * math.pi)
    assert math.remainder(abs(rho.angle) - abs(expected), 2 * math.pi) == pytest.approx(0, abs=1e-9)


def test_roll_onto_flat_errors(sphere, sphere2, plane):
    q0 = StatePoint([1.0, 0.0], [0.0, 0.0], np.eye(2))
    c = Curve(lambda t: np.array([1.0, t]), lambda t: np.array([0.0, 1.0]), 1.0)
    with pytest.raises(NotFlatTarget):
        roll_onto_flat(sphere, sphere2, StatePoint([1.0, 0.0], [1.0, 0.0], np.eye(2)), c)
    with pytest.raises(LoopNotClosed):
        roll_onto_flat(sphere, plane, q0, c, require_loop=True)
    with pytest.raises(DimMismatch):
        roll_onto_flat(sphere, make_manifold({"kind": "euclidean", "n": 3}),
                       StatePoint([1.0, 0.0], [0.0, 0.0, 0.0], np.eye(3, 2)), c)


def test_integrate_errors(sphere, plane):
    c = Curve(lambda t: np.array([1.0, t]), lambda t: np.array([0.0, 1.0]), 1.0)
    with pytest.raises(BaseMismatch):
        integrate_rolling(sphere, plane, StatePoint([1.1, 0.0], [0.0, 0.0], np.eye(2)), ControlPath(c))
    with pytest.raises(InvalidState):
        integrate_rolling(sphere, plane, StatePoint([1.0, 0.0], [0.0, 0.0], 2 * np.eye(2)), ControlPath(c))
    out = Curve(lambda t: np.array([1.0 + 3 * t, 0.0]), lambda t: np.array([3.0, 0.0]), 1.0)
    with pytest.raises(OutOfChart) as e:
        integrate_rolling(sphere, plane, StatePoint([1.0, 0.0], [0.0, 0.0], np.eye(2)), ControlPath(out))
    assert 0.6 < e.value.t_reached < 0.72


se2 = st.tuples(st.floats(-math.pi, math.pi), st.floats(-3, 3), st.floats(-3, 3)).map(
    lambda p: SEElement(rot2(p[0]), np.array([p[1], p[2]])))


@given(se2, se2, se2)
def test_se_star_is_associative_with_inverses(a, b, c):
    lhs = a.star(b).star(c)
    rhs = a.star(b.star(c))
    assert np.allclose(lhs.matrix(), rhs.matrix(), atol=1e-12)
    assert np.allclose(a.star(a.inverse()).matrix(), np.eye(3), atol=1e-12)
    assert np.allclose(a.star(b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)


def test_closed_form_geodesic_rolling_matches_ode(sphere, sphere2):
    x0 = np.array([1.2, 0.3])
    q0 = StatePoint(x0, [1.0, 0.5], rot2(0.7))
    closed = roll_geodesic(sphere, sphere2, q0, np.array([0.6, 0.8]), 2.0)
    c = geodesic_curve(sphere, x0, sphere.frame(x0) @ [0.6, 0.8], 2.0)
    ode = integrate_rolling(sphere, sphere2, q0, ControlPath(c), 1e-3)
    assert np.max(np.abs(closed.As[-1] - ode.As[-1])) < 1e-8
    assert sphere2.chart_gap(closed.xhats[-1], ode.xhats[-1]) < 1e-8


def test_duality_and_equivariance_on_sphere_plane(sphere, plane):
    c = random_curve(sphere, [1.3, 0.2], [0.5, 1.5], 3.0, seed=11)
    q0 = StatePoint(c.position(0), [0.0, 0.0], np.eye(2))
    assert transpose_duality_error(sphere, plane, q0, c, 1e-3) < 1e-8
    R = rot2(-1.3)
    assert equivariance_error(sphere, plane, q0, c, lambda y: R @ y + [2.0, 1.0], lambda y: R, 1e-3) < 1e-10


def test_cartan_map_detects_isometry(sphere, plane):
    q0 = StatePoint([1.0, 0.5], [1.4, -0.3], np.eye(2))
    same = cartan_map(sphere, sphere, q0, 0.5, n_dirs=4, n_radii=3)
    assert same.max_distortion < 1e-6 and same.max_rol < 1e-12
    flat = cartan_map(sphere, plane, StatePoint([1.0, 0.5], [0.0, 0.0], np.eye(2)), 0.5, n_dirs=4, n_radii=3)
    # R(E1, E2) is the unit rotation generator, Frobenius norm sqrt 2
    assert flat.max_rol == pytest.approx(math.sqrt(2), abs=1e-12)
    # distortion of exp-charts between curvature 1 and 0 grows like radius^2
    assert flat.exponent == pytest.approx(2.0, abs=0.1)


def test_codim1_lift():
    S3 = make_manifold({"kind": "space_form", "n": 3, "k": 1.0})
    S2 = make_manifold({"kind": "space_form", "n": 2, "k": 1.0})
    q = StatePoint([0.1, 0.2, 0.3], [1.0, 0.5], np.eye(2, 3))
    lift = codim1_lift_project(S3, S2, q, 0.7)
    assert lift.projection_error == 0.0
    assert np.linalg.det(lift.q_lift.A) == pytest.approx(1.0)
    with pytest.raises(DimMismatch):
        codim1_lift_project(S2, S2, StatePoint([1.0, 0.0], [1.0, 0.0], np.eye(2)), 0.0)


def test_random_curve_has_requested_length(sphere):
    c = random_curve(sphere, [1.57, 0.0], [0.7, 2.0], 10.0, seed=1)
    assert c.length(sphere) == pytest.approx(10.0, abs=1e-8)
    assert np.allclose(c.position(0), [1.57, 0.0])
