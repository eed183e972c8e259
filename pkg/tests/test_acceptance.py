"""Acceptance suite: one group of tests per numbered criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion.
"""
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from conftest import rot2
from rollkit.cli import build_state, load_scenario
from rollkit.controllability import (RolConState, level2_convergence, lie_rank, ns_controllable,
                                     rolcon_curvature, rolcon_reducibility, rolcon_transport,
                                     small_loop_holonomy)
from rollkit.curvature import rol, rol_tilde_matrix
from rollkit.dynamics import (ControlPath, SEElement, equivariance_error, factorization_error, geodesic_curve,
                              integrate_rolling, random_curve, roll_geodesic, roll_onto_flat,
                              transpose_duality_error)
from rollkit.extrinsic import (RESIDUALS, correspondence, embedded_pair, integrate_rolling_map,
                               rotation_about_normal)
from rollkit.geometry3d import contact_invariants, detect_structure
from rollkit.manifold_core import Curve, bivector, hodge_star3, phi, so_bracket
from rollkit.state_space import StatePoint
from rollkit.zoo import make_manifold

crit = pytest.mark.criterion

SPHERE = {"kind": "space_form", "n": 2, "k": 1.0}
PLANE = {"kind": "euclidean", "n": 2}
vec3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.array)


def latitude(r, turns=1.0):
    return Curve(lambda t: np.array([r, t]), lambda t: np.array([0.0, 1.0]), 2 * math.pi * turns)


def ellipse_loop(x0, a, b, phase):
    """Closed chart ellipse through x0."""
    c, s = math.cos(phase), math.sin(phase)
    return Curve(lambda t: x0 + [a * (math.cos(t + phase) - c), b * (math.sin(t + phase) - s)],
                 lambda t: np.array([-a * math.sin(t + phase), b * math.cos(t + phase)]), 2 * math.pi)


def sup_state_gap(M, Mh, t1, t2):
    assert len(t1.ts) == len(t2.ts)
    return max(max(M.chart_gap(a, b) for a, b in zip(t1.xs, t2.xs)),
               max(Mh.chart_gap(a, b) for a, b in zip(t1.xhats, t2.xhats)),
               float(np.max(np.abs(t1.As - t2.As))))


# 1 -------------------------------------------------------------------------

@crit(1, "rolling invariants: isometry defect and transport factorization")
def test_rolling_invariants_on_sphere_plane(sphere, plane):
    c = random_curve(sphere, [1.57, 0.0], [0.7, 2.0], 10.0, seed=1)
    assert c.length(sphere) == pytest.approx(10.0, abs=1e-8)
    q0 = StatePoint(c.position(0), [0.0, 0.0], rot2(0.5))
    traj = integrate_rolling(sphere, plane, q0, ControlPath(c), 1e-3, reorthonormalize=False)
    assert traj.max_residual("isometry_defect") < 1e-7
    assert factorization_error(sphere, plane, traj, 1e-3, curve=c) < 1e-6


# 2 -------------------------------------------------------------------------

@crit(2, "closed-form geodesic rolling against the ODE")
@pytest.mark.parametrize("M,Mh,x0,xh0,v", [
    (SPHERE, PLANE, [1.2, 0.3], [0.5, -0.5], [0.6, 0.8]),
    (SPHERE, {"kind": "space_form", "n": 2, "k": 2.0}, [1.2, 0.3], [1.0, 0.5], [0.8, -0.6]),
    ({"kind": "mbeta_group", "group": "heisenberg"}, {"kind": "mbeta_group", "group": "sl2"},
     [0.1, -0.2, 0.3], [0.0, 0.1, 0.0], [0.48, 0.6, 0.64]),
])
def test_geodesic_closed_form(M, Mh, x0, xh0, v):
    M, Mh = make_manifold(M), make_manifold(Mh)
    n = M.dim
    A = rot2(0.7) if n == 2 else special_ortho_group.rvs(3, random_state=4)
    q0 = StatePoint(x0, xh0, A)
    T = 2.0 if n == 2 else 1.0  # the group charts are bounded boxes
    closed = roll_geodesic(M, Mh, q0, np.array(v), T, 1e-3)
    c = geodesic_curve(M, np.array(x0), M.frame(np.array(x0)) @ v, T, 1e-3)
    ode = integrate_rolling(M, Mh, q0, ControlPath(c), 1e-3)
    assert sup_state_gap(M, Mh, closed, ode) < 1e-6


# 3 -------------------------------------------------------------------------

@crit(3, "flat-target holonomy: latitude angle and anti-homomorphism")
def test_latitude_rho_angle(sphere, plane):
    r = math.pi / 3
    q0 = StatePoint([r, 0.0], [0.0, 0.0], np.eye(2))
    _, rho = roll_onto_flat(sphere, plane, q0, latitude(r), 1e-3, require_loop=True)
    angle = math.atan2(rho.rotation[1, 0], rho.rotation[0, 0])
    assert math.remainder(angle - math.pi, 2 * math.pi) == pytest.approx(0.0, abs=1e-5)


@crit(3, "flat-target holonomy: latitude angle and anti-homomorphism")
@settings(max_examples=5, deadline=None)
@given(st.floats(0.1, 0.4), st.floats(0.1, 0.4), st.floats(0, 6.28),
       st.floats(0.1, 0.4), st.floats(0.1, 0.4), st.floats(0, 6.28), st.floats(-math.pi, math.pi))
def test_rho_composes_in_reverse_order(a1, b1, p1, a2, b2, p2, ang):
    S = make_manifold(SPHERE)
    P = make_manifold(PLANE)
    x0 = np.array([1.3, 0.2])
    g1, g2 = ellipse_loop(x0, a1, b1, p1), ellipse_loop(x0, a2, b2, p2)
    q0 = StatePoint(x0, [0.3, -0.2], rot2(ang))
    _, r1 = roll_onto_flat(S, P, q0, g1, 1e-3, require_loop=True)
    _, r2 = roll_onto_flat(S, P, q0, g2, 1e-3, require_loop=True)
    # oracle: integrate the rolling ODE along g1 followed by g2
    traj = integrate_rolling(S, P, q0, ControlPath(g1.then(g2)), 1e-3)
    R12 = traj.As[-1] @ q0.A.T
    t12 = traj.xhats[-1] - traj.xhats[0]
    # the second loop is traversed from the state left by the first: (R1 R2, R1 t2 + t1)
    comp = r1.star(r2)
    assert np.max(np.abs(comp.rotation - R12)) < 1e-7
    assert np.max(np.abs(comp.translation - t12)) < 1e-7


# 4 -------------------------------------------------------------------------

@crit(4, "Rol vanishes and the rank collapses for equal space forms")
@pytest.mark.parametrize("spec,x,xh", [
    (SPHERE, [1.0, 0.5], [0.7, 2.0]),
    ({"kind": "space_form", "n": 3, "k": 1.0}, [0.1, 0.2, -0.1], [0.3, -0.2, 0.4]),
])
def test_equal_space_forms(spec, x, xh):
    M = make_manifold(spec)
    n = M.dim
    A = rot2(0.9) if n == 2 else special_ortho_group.rvs(3, random_state=2)
    q = StatePoint(x, xh, A)
    E = np.eye(n)
    worst = max(np.linalg.norm(rol(M, M, q, E[a], E[b])) for a in range(n) for b in range(a + 1, n))
    assert worst < 1e-12
    assert lie_rank(M, M, q).final_rank == n


# 5 -------------------------------------------------------------------------

RANK_TABLE = [
    ("sphere_plane_rank", 5),
    ("sphere_sphere_rank", 2),
    ("mbeta_pair_aligned", 7),
    ("mbeta_pair_generic", 8),
    ("so3_heisenberg_generic", 7),
    ("warped_matched", 6),
    ("flat_flat_rank", 3),
]


@crit(5, "orbit-dimension table with singular-value gap, depth and time limits")
@pytest.mark.parametrize("name,expected", RANK_TABLE)
def test_rank_table(name, expected):
    sc = load_scenario(name)
    M = make_manifold(sc.M)
    Mh = make_manifold(sc.M_hat)
    q = build_state(M, Mh, sc.state)
    t0 = time.perf_counter()
    rep = lie_rank(M, Mh, q, seed=sc.seed)
    elapsed = time.perf_counter() - t0
    assert rep.final_rank == expected
    assert rep.gap_ratio >= 1e3
    assert rep.attained_depth <= 4
    assert elapsed < 60


# 6 -------------------------------------------------------------------------

@crit(6, "no-spin controllability criterion")
def test_ns_sphere_pair_controllable():
    S = make_manifold(SPHERE)
    assert ns_controllable(S, S).controllable


@crit(6, "no-spin controllability criterion")
def test_ns_product_pair_not_controllable():
    RS2 = make_manifold({"kind": "product", "factors": [{"kind": "euclidean", "n": 1}, SPHERE]})
    rep = ns_controllable(RS2, RS2, x0=np.array([0.0, 1.0, 0.5]), x0_hat=np.array([0.3, 1.2, -0.4]))
    assert not rep.controllable and rep.worst_deficiency >= 1


# 7 -------------------------------------------------------------------------

@crit(7, "rolling connection: norm drift, geodesic transport, curvature, reducibility")
def test_rolcon_norm_drift(sphere):
    c = random_curve(sphere, [1.3, 0.2], [0.5, 1.0], 5.0, seed=2)
    path = rolcon_transport(sphere, 2.0, c, RolConState(np.array([0.4, -0.7]), 0.3), 1e-3)
    assert path.hk_drift() < 1e-8


@crit(7, "rolling connection: norm drift, geodesic transport, curvature, reducibility")
def test_rolcon_along_geodesic(sphere):
    x0 = np.array([1.2, 0.3])
    v = np.array([0.6, 0.8])
    c = geodesic_curve(sphere, x0, sphere.frame(x0) @ v, 3.0, 1e-3)
    path = rolcon_transport(sphere, 1.0, c, RolConState(np.zeros(2), 1.0), 1e-3)
    err = 0.0
    for t, X, r in zip(path.ts, path.Xs, path.rs):
        gd = sphere.coframe(c.position(t)) @ c.velocity(t)
        err = max(err, float(np.abs(X + math.sin(t) * gd).max()), abs(r - math.cos(t)))
    assert err < 1e-7


@crit(7, "rolling connection: norm drift, geodesic transport, curvature, reducibility")
@pytest.mark.parametrize("k", [2.0, -4.0])
def test_rolcon_small_loop(sphere, k):
    x = np.array([1.1, 0.4])
    E = np.eye(2)
    _, area, L = small_loop_holonomy(sphere, k, x, 1e-2)
    F = rolcon_curvature(sphere, k, x, E[0], E[1])
    assert np.max(np.abs(L - F)) < 1e-3


@crit(7, "rolling connection: norm drift, geodesic transport, curvature, reducibility")
@pytest.mark.parametrize("spec,x", [(SPHERE, [1.0, 0.3]), ({"kind": "space_form", "n": 3, "k": 1.0}, [0.1, 0.0, 0.2])])
def test_rolcon_space_form_reducibility(spec, x):
    M = make_manifold(spec)
    rep = rolcon_reducibility(M, 1.0, np.array(x), n_loops=4)
    assert rep.dims == [1] * (M.dim + 1)


# 8 -------------------------------------------------------------------------

@crit(8, "3D classification and contact invariants")
@pytest.mark.parametrize("name,kappa,K2", [("so3", 1.0, 0.25), ("heisenberg", 0.0, -0.75), ("sl2", -1.0, -1.75)])
def test_mbeta_groups(name, kappa, K2):
    M = make_manifold({"kind": "mbeta_group", "group": name})
    s = detect_structure(M)
    assert s.label() == "m_beta(0.5)"
    assert max(s.residuals[k] for k in ("table_pattern", "perp_derivatives", "beta_constancy")) < 1e-9
    ci = contact_invariants(M, structure=s)
    assert np.max(np.abs(ci.kappa - kappa)) < 1e-8
    assert np.max(np.abs(ci.K2 - K2)) < 1e-8


@crit(8, "3D classification and contact invariants")
def test_cosh_profile():
    W = make_manifold({"kind": "warped", "profile": "cosh", "N": {"kind": "space_form", "n": 2, "k": -1.0}})
    s = detect_structure(W)
    assert s.kind == "warped"
    assert max(abs(p["log_derivative"] - math.tanh(p["x"][0])) for p in s.profile) < 1e-6


# 9 -------------------------------------------------------------------------

@crit(9, "extrinsic and intrinsic rolling agree")
@pytest.mark.parametrize("seed", [0, 7])
def test_extrinsic_matches_intrinsic(seed):
    S, P = embedded_pair(1.0)
    c = random_curve(S, [1.4, 0.0], [0.6, 1.5], 5.0, seed=seed)
    traj = integrate_rolling(S, P, StatePoint(c.position(0), [0.2, 0.1], rot2(0.3)), ControlPath(c), 1e-3)
    via = correspondence(S, P, traj)
    direct = integrate_rolling_map(S, c, SEElement(via.Us[0], via.ps[0]), 1e-3)
    assert max(np.max(np.abs(via.Us - direct.Us)), np.max(np.abs(via.ps - direct.ps))) < 1e-6
    for name in RESIDUALS:
        assert direct.max_residual(name) < 1e-6, name
        assert via.max_residual(name) < 1e-6, name
    # contact points trace the intrinsic x^(t)
    assert np.max(np.abs(direct.contact_points[:, :2] - traj.xhats)) < 1e-6


@crit(9, "extrinsic and intrinsic rolling agree")
def test_extrinsic_latitude_matches_flat_rho():
    S, P = embedded_pair(1.0)
    r = math.pi / 3
    q0 = StatePoint([r, 0.0], [0.0, 0.0], np.eye(2))
    via = correspondence(S, P, integrate_rolling(S, P, q0, ControlPath(latitude(r)), 1e-3))
    ang = rotation_about_normal(via.Us[0], via.Us[-1])
    assert math.remainder(ang - math.pi, 2 * math.pi) == pytest.approx(0.0, abs=1e-6)


# 10 ------------------------------------------------------------------------

@crit(10, "exact identities: Hodge bracket, symmetric Rol, level-2 convergence")
@given(vec3, vec3)
def test_hodge_bracket_identity(X, Y):
    lhs = so_bracket(phi(hodge_star3(X)), phi(hodge_star3(Y)))
    assert np.max(np.abs(lhs - phi(bivector(X, Y)))) < 1e-9


@crit(10, "exact identities: Hodge bracket, symmetric Rol, level-2 convergence")
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_rol_tilde_symmetry(seed):
    pairs = [("heisenberg", "sl2"), ("so3", "heisenberg")]
    for a, b in pairs:
        M = make_manifold({"kind": "mbeta_group", "group": a})
        Mh = make_manifold({"kind": "mbeta_group", "group": b})
        q = StatePoint([0.1, 1.0, 0.3], [0.2, 0.1, -0.1], special_ortho_group.rvs(3, random_state=seed))
        S = rol_tilde_matrix(M, Mh, q)
        assert np.max(np.abs(S - S.T)) < 1e-9


@crit(10, "exact identities: Hodge bracket, symmetric Rol, level-2 convergence")
@pytest.mark.parametrize("M,Mh,x,xh", [
    (SPHERE, PLANE, [1.0, 0.5], [0.0, 0.0]),
    ({"kind": "mbeta_group", "group": "heisenberg"}, {"kind": "mbeta_group", "group": "sl2"},
     [0.1, 0.2, 0.0], [0.0, -0.1, 0.2]),
])
def test_level2_flow_commutator_order(M, Mh, x, xh):
    M, Mh = make_manifold(M), make_manifold(Mh)
    A = rot2(0.4) if M.dim == 2 else special_ortho_group.rvs(3, random_state=5)
    _, errs, order = level2_convergence(M, Mh, StatePoint(x, xh, A))
    assert np.all(np.diff(errs) < 0)
    assert order >= 1.8


# 11 ------------------------------------------------------------------------

def sphere_rotation(c):
    """Rotation about the polar axis: shifts the longitude, identity in polar frames."""
    return (lambda y: np.array([y[0], y[1] + c])), (lambda y: np.eye(2))


def plane_motion(a, shift):
    R = rot2(a)
    return (lambda y: R @ y + shift), (lambda y: R)


@crit(11, "isometry equivariance and transpose duality")
@pytest.mark.parametrize("target,iso", [
    (PLANE, plane_motion(-1.3, np.array([2.0, 1.0]))),
    ({"kind": "space_form", "n": 2, "k": 2.0}, sphere_rotation(0.9)),
    (SPHERE, sphere_rotation(-0.4)),
])
def test_equivariance_and_duality(sphere, target, iso):
    Mh = make_manifold(target)
    c = random_curve(sphere, [1.3, 0.2], [0.5, 1.2], 3.0, seed=11)
    xh = [0.0, 0.0] if Mh.dim == 2 and target is PLANE else [1.2, -0.3]
    q0 = StatePoint(c.position(0), xh, rot2(0.6))
    assert equivariance_error(sphere, Mh, q0, c, *iso, step=1e-3) < 1e-6
    assert transpose_duality_error(sphere, Mh, q0, c, 1e-3) < 1e-6
