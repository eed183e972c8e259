import math

import numpy as np
import pytest

from rollkit.errors import BadSpec
from rollkit.manifold_core import ChartModel
from rollkit.zoo import ManifoldSpec, make_manifold, warping_profile


def scalar_curvature(Rf):
    n = Rf.shape[0]
    return sum(Rf[i, j, j, i] for i in range(n) for j in range(n))


def chart_sectional(M, x, u, v):
    J = M.coframe(x)
    return M.sectional_curvature(x, J @ u, J @ v)


def same_sectionals(M, C, x, tol):
    rng = np.random.default_rng(0)
    pairs = [(np.eye(3)[i], np.eye(3)[j]) for i, j in [(0, 1), (1, 2), (0, 2)]]
    pairs += [tuple(rng.normal(size=(2, 3))) for _ in range(3)]
    return all(abs(chart_sectional(M, x, u, v) - chart_sectional(C, x, u, v)) < tol for u, v in pairs)


def metric_only(M):
    """The same manifold seen only through its metric tensor."""
    return ChartModel(M.dim, M.metric, domain_fn=M.in_domain, name="metric-only")


def milnor_sectional(lam):
    """Sectional curvatures (K12, K23, K13) for [e2,e3]=l1 e1, [e3,e1]=l2 e2, [e1,e2]=l3 e3."""
    h = sum(lam) / 2
    mu = [h - l for l in lam]
    r = [2 * mu[1] * mu[2], 2 * mu[0] * mu[2], 2 * mu[0] * mu[1]]
    return ((r[0] + r[1] - r[2]) / 2, (r[1] + r[2] - r[0]) / 2, (r[0] + r[2] - r[1]) / 2)


@pytest.mark.parametrize("group", ["so3", "heisenberg", "sl2"])
def test_lie_group_sectional_curvatures(group):
    from rollkit.zoo import mbeta_structure_constants
    C = mbeta_structure_constants(group)
    lam = (C[1, 2, 0], C[2, 0, 1], C[0, 1, 2])
    K12, K23, K13 = milnor_sectional(lam)
    M = make_manifold({"kind": "mbeta_group", "group": group})
    x = np.array([0.1, -0.2, 0.3])
    E = np.eye(3)
    assert M.sectional_curvature(x, E[0], E[1]) == pytest.approx(K12, abs=1e-12)
    assert M.sectional_curvature(x, E[1], E[2]) == pytest.approx(K23, abs=1e-12)
    assert M.sectional_curvature(x, E[0], E[2]) == pytest.approx(K13, abs=1e-12)


@pytest.mark.parametrize("group,scal", [("so3", 1.5), ("heisenberg", -0.5), ("sl2", -2.5)])
def test_lie_group_metric_reproduces_scalar_curvature(group, scal):
    M = make_manifold({"kind": "mbeta_group", "group": group})
    x = np.array([0.2, 0.1, -0.3])
    assert scalar_curvature(M.frame_curvature(x)) == pytest.approx(scal, abs=1e-12)
    assert scalar_curvature(metric_only(M).frame_curvature(x)) == pytest.approx(scal, abs=2e-4)


def test_lie_group_frame_is_orthonormal_and_omega_matches_metric():
    M = make_manifold({"kind": "mbeta_group", "group": "sl2"})
    x = np.array([0.3, -0.4, 0.2])
    E = M.frame(x)
    assert np.allclose(E.T @ M.metric(x) @ E, np.eye(3), atol=1e-12)
    C = metric_only(M)
    from rollkit.manifold_core import frame_omega
    assert np.allclose(frame_omega(C, x, M.frame), M.omega(x), atol=1e-6)


@pytest.mark.parametrize("spec,K", [
    ({"kind": "space_form", "n": 3, "k": 1.0}, 1.0),
    ({"kind": "space_form", "n": 3, "k": -2.0}, -0.5),
    ({"kind": "space_form", "n": 2, "k": -1.0}, -1.0),
    ({"kind": "space_form", "n": 2, "k": 4.0, "chart": "stereographic"}, 0.25),
])
def test_space_forms_against_metric_only_curvature(spec, K):
    M = make_manifold(spec)
    x = M.sample_points(1, seed=3)[0]
    E = np.eye(M.dim)
    assert M.sectional_curvature(x, E[0], E[1]) == pytest.approx(K, abs=1e-12)
    C = metric_only(M)
    assert C.sectional_curvature(x, E[0], E[1]) == pytest.approx(K, abs=1e-4)


@pytest.mark.parametrize("profile", ["cos", "cosh", "sine_bump", "exp"])
def test_warped_radial_curvature_is_minus_f2_over_f(profile):
    M = make_manifold({"kind": "warped", "profile": profile, "N": {"kind": "euclidean", "n": 2}})
    f, df, ddf, _ = warping_profile(profile)
    x = np.array([0.3, 0.2, -0.1])
    E = np.eye(3)
    rad = M.radial
    t0, t1 = M.tangential
    assert M.sectional_curvature(x, E[rad], E[t0]) == pytest.approx(-ddf(0.3) / f(0.3), abs=1e-12)
    assert M.sectional_curvature(x, E[t0], E[t1]) == pytest.approx(-(df(0.3) / f(0.3)) ** 2, abs=1e-12)
    assert same_sectionals(M, metric_only(M), x, 2e-4)


def test_warped_over_sphere_full_tensor_matches_metric_only():
    M = make_manifold({"kind": "warped", "profile": "sine_bump", "profile_params": {"a": 0.3},
                       "N": {"kind": "space_form", "n": 2, "k": 1.0}})
    x = np.array([0.2, 1.0, 0.3])
    assert same_sectionals(M, metric_only(M), x, 2e-4)
    from rollkit.manifold_core import frame_omega
    assert np.allclose(frame_omega(metric_only(M), x, M.frame), M.omega(x), atol=1e-6)


def test_product_curvature_is_block_diagonal():
    M = make_manifold({"kind": "product", "factors": [{"kind": "euclidean", "n": 1},
                                                      {"kind": "space_form", "n": 2, "k": 1.0}]})
    x = np.array([0.5, 1.0, 0.2])
    E = np.eye(3)
    assert M.sectional_curvature(x, E[0], E[1]) == pytest.approx(0.0, abs=1e-14)
    assert M.sectional_curvature(x, E[1], E[2]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("spec", [
    {"kind": "space_form", "n": 2, "k": 0.0},
    {"kind": "space_form", "n": 3, "k": 1.0, "chart": "polar"},
    {"kind": "euclidean", "n": 0},
    {"kind": "warped", "profile": "nope"},
    {"kind": "warped", "profile": "sine_bump", "profile_params": {"a": 2.0}},
    {"kind": "mbeta_group", "group": "su2"},
    {"kind": "mbeta_group", "scale": -1.0},
    {"kind": "product", "factors": [{"kind": "euclidean", "n": 1}]},
    {"kind": "klein_bottle"},
    {"n": 2},
])
def test_bad_specs(spec):
    with pytest.raises(BadSpec):
        make_manifold(spec)


def test_spec_round_trip():
    d = {"kind": "space_form", "n": 3, "k": 2.0}
    assert ManifoldSpec.from_dict(d).to_dict() == d


def test_mbeta_scale_sets_beta():
    M = make_manifold({"kind": "mbeta_group", "group": "so3", "scale": 2.0})
    assert M.constant_curvature == pytest.approx(1.0)
    x = np.zeros(3)
    E = np.eye(3)
    assert M.sectional_curvature(x, E[0], E[1]) == pytest.approx(1.0, abs=1e-12)


def test_polar_chart_wraps_longitude():
    S = make_manifold({"kind": "space_form", "n": 2, "k": 1.0})
    assert S.chart_gap([1.0, 0.0], [1.0, 2 * math.pi]) == pytest.approx(0.0, abs=1e-15)
    p = S.embed(np.array([1.2, -2.5]))
    assert np.allclose(S.chart_of(p), [1.2, -2.5])
    F = S.embedded_frame(np.array([1.2, -2.5]))
    assert np.allclose(F.T @ F, np.eye(3), atol=1e-14)
    assert np.allclose(F[:, 2], p, atol=1e-14)
