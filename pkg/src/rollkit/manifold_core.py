"""Riemannian primitives in a single chart, with an orthonormal frame.

Every model exposes two views of the same geometry:

* the chart view: ``metric(x)``, ``christoffel(x)`` with ``G[c, a, b]`` the
  coefficient of d/dx^c in nabla_{d/dx^a} d/dx^b, and the coordinate curvature;
* the frame view: ``frame(x)`` whose columns are the coordinate components of
  an orthonormal frame E_1..E_n, ``omega(x)`` with
  ``W[i, j, k] = g(nabla_{E_i} E_j, E_k)``, ``frame_curvature(x)`` with
  ``Rf[i, j, k, l] = g(R(E_i, E_j) E_k, E_l)`` and its covariant derivative
  ``DRf[m, i, j, k, l] = g((nabla_{E_m} R)(E_i, E_j) E_k, E_l)``.

Curvature convention: R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y].

The generic implementations below use central finite differences; the zoo
models override them with closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (DimNot3, FrameNotOrthonormal, NonSPD, OutOfChart,
                     StepTooLarge)
from .ode import n_steps_for, rk4_pieces

H_METRIC = 1e-5
H_FRAME = 1e-5
H_CURV = 1e-4

# star pairs of an oriented orthonormal 3-frame (0-based): *E1 = E2^E3, ...
STAR_PAIRS = ((1, 2), (2, 0), (0, 1))


# ---------------------------------------------------------------------------
# small linear algebra helpers


def omega_matrix(W, u):
    """Connection matrix Om(u) with ``Om[k, j] = sum_m u_m W[m, j, k]``.

    A frame-component field w is parallel along a curve with frame velocity u
    exactly when ``w' = -Om(u) w``.
    """
    return np.einsum("m,mjk->kj", u, W)


def curvature_matrix(Rf, X, Y):
    """Matrix of the endomorphism R(X, Y) in frame components."""
    return np.einsum("ijkl,i,j->lk", Rf, X, Y)


def bivector(X, Y):
    """X ^ Y as the antisymmetric matrix X Y^T - Y X^T."""
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    return np.outer(X, Y) - np.outer(Y, X)


def phi(W):
    """so(n) element g(., X)Y - g(., Y)X attached to the bivector X ^ Y."""
    return -np.asarray(W, float)


def phi_inv(S):
    return -np.asarray(S, float)


def pair_basis(n):
    return list(combinations(range(n), 2))


def curvature_operator(Rf):
    """Matrix of phi^{-1} o R on Lambda^2 in the basis E_i ^ E_j, i < j.

    For n = 3 the basis is reordered to the Hodge-dual order
    (E2^E3, E3^E1, E1^E2).
    """
    n = Rf.shape[0]
    pairs = list(STAR_PAIRS) if n == 3 else pair_basis(n)
    m = len(pairs)
    out = np.empty((m, m))
    for p, (i, j) in enumerate(pairs):
        for q, (a, b) in enumerate(pairs):
            out[p, q] = Rf[a, b, i, j]
    return out


def skew_cross(z):
    """Cross-product matrix [z]_x."""
    z = np.asarray(z, float)
    return np.array([[0.0, -z[2], z[1]], [z[2], 0.0, -z[0]], [-z[1], z[0], 0.0]])


def hodge_star3(element, direction=None):
    """Hodge dual on an oriented orthonormal 3-frame.

    A vector (shape (3,)) maps to its dual bivector as an antisymmetric 3x3
    matrix ``W[i, j]`` (coefficient of E_i ^ E_j is W[i, j] for i < j).  An
    antisymmetric matrix maps back to a vector.  ``direction`` may be
    "vector_to_bivector" or "bivector_to_vector" to force the interpretation.
    """
    a = np.asarray(element, float)
    if direction is None:
        direction = "vector_to_bivector" if a.ndim == 1 else "bivector_to_vector"
    if direction == "vector_to_bivector":
        if a.shape != (3,):
            raise DimNot3("hodge_star3 needs a 3-vector")
        W = np.zeros((3, 3))
        for c, (i, j) in enumerate(STAR_PAIRS):
            W[i, j] += a[c]
            W[j, i] -= a[c]
        return W
    if direction == "bivector_to_vector":
        if a.shape != (3, 3):
            raise DimNot3("hodge_star3 needs a 3x3 bivector")
        return np.array([a[i, j] for (i, j) in STAR_PAIRS])
    raise ValueError(f"unknown direction {direction!r}")


def so_bracket(S, T):
    return S @ T - T @ S


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    components: np.ndarray
    basis: str = "chart"

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, float))
        object.__setattr__(self, "components", np.asarray(self.components, float))
        if self.basis not in ("chart", "frame"):
            raise ValueError("basis must be 'chart' or 'frame'")

    def frame_components(self, M):
        if self.basis == "frame":
            return self.components
        return M.coframe(self.base) @ self.components

    def chart_components(self, M):
        if self.basis == "chart":
            return self.components
        return M.frame(self.base) @ self.components


@dataclass(frozen=True, eq=False)
class ConnectionTable:
    """``gamma[i, j] = g(nabla_{E_j} E_a, E_b)`` where (a, b) is the i-th star pair."""

    gamma: np.ndarray

    @classmethod
    def from_omega(cls, W):
        if W.shape != (3, 3, 3):
            raise DimNot3("connection tables are defined for n = 3")
        G = np.empty((3, 3))
        for i, (a, b) in enumerate(STAR_PAIRS):
            for j in range(3):
                G[i, j] = W[j, a, b]
        return cls(G)

    def to_omega(self):
        W = np.zeros((3, 3, 3))
        for i, (a, b) in enumerate(STAR_PAIRS):
            for j in range(3):
                W[j, a, b] = self.gamma[i, j]
                W[j, b, a] = -self.gamma[i, j]
        return W

    def entry(self, upper, pair):
        """Gamma^upper_(pair) with 1-based indices, e.g. entry(1, (2, 3))."""
        a, b = pair[0] - 1, pair[1] - 1
        W = self.to_omega()
        return W[upper - 1, a, b]


class Curve:
    """A parametrized curve in chart coordinates on [0, duration]."""

    def __init__(self, position, velocity, duration):
        self._pos = position
        self._vel = velocity
        self.duration = float(duration)
        self._pieces = None

    @classmethod
    def from_samples(cls, ts, xs):
        ts = np.asarray(ts, float)
        xs = np.asarray(xs, float)
        if np.any(np.diff(ts) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if ts[0] != 0.0:
            ts = ts - ts[0]
        spline = CubicSpline(ts, xs, axis=0)
        deriv = spline.derivative()
        return cls(lambda t: spline(t), lambda t: deriv(t), ts[-1])

    @classmethod
    def from_function(cls, position, velocity, duration):
        return cls(position, velocity, duration)

    @classmethod
    def constant(cls, x, duration=1.0):
        x = np.asarray(x, float)
        return cls(lambda t: x.copy(), lambda t: np.zeros_like(x), duration)

    def position(self, t):
        return np.asarray(self._pos(t), float)

    def velocity(self, t):
        return np.asarray(self._vel(t), float)

    def then(self, other):
        """Concatenation: first self, then other (other must start at our end)."""
        T1 = self.duration

        def pos(t):
            return self.position(t) if t <= T1 else other.position(t - T1)

        def vel(t):
            return self.velocity(t) if t <= T1 else other.velocity(t - T1)

        out = Curve(pos, vel, T1 + other.duration)
        out._pieces = self.pieces() + [(T1 + t0, c) for t0, c in other.pieces()]
        return out

    def pieces(self):
        """Smooth pieces as (start time, curve); integrators step each separately."""
        return list(self._pieces) if self._pieces else [(0.0, self)]

    def length(self, M):
        """Riemannian length, by adaptive quadrature on each smooth piece."""
        from scipy.integrate import quad

        def speed(t, c):
            v = c.velocity(t)
            return math.sqrt(max(0.0, float(v @ M.metric(c.position(t)) @ v)))

        return sum(quad(speed, 0.0, c.duration, args=(c,), limit=200, epsabs=1e-12, epsrel=1e-12)[0]
                   for _, c in self.pieces())


# ---------------------------------------------------------------------------
# model base class


class ManifoldModel:
    """Base class: override ``metric`` and ``in_domain`` at minimum."""

    backend = "chart"
    # an adapted frame is one the 3D structure detection may use directly
    adapted_frame = False
    # sectional curvature if known to be constant, else None
    constant_curvature: Optional[float] = None

    def __init__(self, dim, name="manifold", box=None):
        self.dim = int(dim)
        self.name = name
        if box is None:
            box = (-np.ones(self.dim), np.ones(self.dim))
        self.box = (np.asarray(box[0], float), np.asarray(box[1], float))

    # -- domain ----------------------------------------------------------
    def in_domain(self, x) -> bool:
        return True

    def check(self, x, t=None):
        x = np.asarray(x, float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)) or not self.in_domain(x):
            raise OutOfChart(f"{self.name}: point {x} outside chart domain", t_reached=t)
        return x

    def chart_gap(self, x, y):
        """Distance between two coordinate tuples that name points of M."""
        return float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))

    def sample_points(self, count, seed=0):
        """Quasi-random points of the sampling box that lie in the domain."""
        from scipy.stats import qmc

        sampler = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        lo, hi = self.box
        pts = []
        while len(pts) < count:
            for p in qmc.scale(sampler.random(4 * count), lo, hi):
                if self.in_domain(p):
                    pts.append(p)
                    if len(pts) == count:
                        break
        return np.array(pts)

    # -- chart view ------------------------------------------------------
    def metric(self, x):
        raise NotImplementedError

    def metric_checked(self, x):
        g = self.metric(x)
        if not np.all(np.isfinite(g)) or np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) <= 0:
            raise NonSPD(f"{self.name}: metric not positive definite at {x}")
        return g

    def metric_derivative(self, x):
        """``dg[a, i, j] = d g_ij / d x^a`` by central differences."""
        n = self.dim
        dg = np.empty((n, n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = H_METRIC
            dg[a] = (self.metric(x + e) - self.metric(x - e)) / (2 * H_METRIC)
        return dg

    def christoffel(self, x):
        """``G[c, a, b]`` from the metric (Levi-Civita formula)."""
        g = self.metric(x)
        ginv = np.linalg.inv(g)
        dg = self.metric_derivative(x)
        # Gamma_{d a b} = (d_a g_db + d_b g_da - d_d g_ab) / 2
        low = 0.5 * (np.einsum("adb->dab", dg) + np.einsum("bda->dab", dg) - dg)
        return np.einsum("cd,dab->cab", ginv, low)

    def coordinate_riemann(self, x):
        """``R[l, i, j, k]``: R(d_i, d_j) d_k = R[l, i, j, k] d_l."""
        n = self.dim
        G = self.christoffel(x)
        dG = np.empty((n, n, n, n))  # dG[a, c, i, j] = d_a G^c_ij
        for a in range(n):
            e = np.zeros(n)
            e[a] = H_CURV
            dG[a] = (self.christoffel(x + e) - self.christoffel(x - e)) / (2 * H_CURV)
        R = (np.einsum("iljk->lijk", dG)
             - np.einsum("jlik->lijk", dG)
             + np.einsum("lie,ejk->lijk", G, G)
             - np.einsum("lje,eik->lijk", G, G))
        return R

    # -- frame view ------------------------------------------------------
    def frame(self, x):
        """Orthonormal frame from the Cholesky factor of the metric."""
        g = self.metric(x)
        try:
            L = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise NonSPD(f"{self.name}: metric not positive definite at {x}") from exc
        return np.linalg.inv(L).T

    def coframe(self, x):
        return np.linalg.inv(self.frame(x))

    def frame_derivative(self, x):
        """``dE[a, c, j] = d E[c, j] / d x^a``."""
        n = self.dim
        dE = np.empty((n, n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = H_FRAME
            dE[a] = (self.frame(x + e) - self.frame(x - e)) / (2 * H_FRAME)
        return dE

    def omega(self, x):
        E = self.frame(x)
        J = np.linalg.inv(E)
        G = self.christoffel(x)
        dE = self.frame_derivative(x)
        # (nabla_{E_i} E_j)^c = E^a_i (d_a E^c_j + G^c_ab E^b_j)
        cov = np.einsum("ai,acj->cij", E, dE) + np.einsum("ai,cab,bj->cij", E, G, E)
        return np.einsum("kc,cij->ijk", J, cov)

    def omega_along(self, x, direction, h=H_FRAME):
        """Central difference of omega along the coordinate vector ``direction``."""
        return (self.omega(x + h * direction) - self.omega(x - h * direction)) / (2 * h)

    def frame_curvature(self, x):
        """Frame curvature from the coordinate curvature tensor."""
        E = self.frame(x)
        g = self.metric(x)
        R = self.coordinate_riemann(x)
        return np.einsum("lijk,ia,jb,kc,le,ed->abcd", R, E, E, E, g, E)

    def frame_curvature_from_omega(self, x, h=H_FRAME):
        """Frame curvature from omega and its derivatives along the frame."""
        W = self.omega(x)
        E = self.frame(x)
        n = self.dim
        dW = np.empty((n, n, n, n))  # dW[i] = E_i(W)
        for i in range(n):
            dW[i] = self.omega_along(x, E[:, i], h)
        return curvature_from_omega(W, dW)

    def frame_curvature_derivative(self, x, h=H_CURV):
        E = self.frame(x)
        W = self.omega(x)
        Rf = self.frame_curvature(x)
        n = self.dim
        ER = np.empty((n,) * 5)
        for m in range(n):
            d = E[:, m]
            ER[m] = (self.frame_curvature(x + h * d) - self.frame_curvature(x - h * d)) / (2 * h)
        return covariant_curvature_derivative(W, Rf, ER)

    def sectional_curvature(self, x, X, Y):
        """Sectional curvature of span{X, Y}, frame components."""
        Rf = self.frame_curvature(x)
        num = np.einsum("ijkl,i,j,k,l->", Rf, X, Y, Y, X)
        den = (X @ X) * (Y @ Y) - (X @ Y) ** 2
        return num / den


def curvature_from_omega(W, dW):
    """Frame curvature given W and ``dW[i] = E_i(W)``."""
    bracket = W - np.transpose(W, (1, 0, 2))  # [E_i, E_j] = sum_m bracket[i,j,m] E_m
    return (dW - np.transpose(dW, (1, 0, 2, 3))
            + np.einsum("jkp,ipl->ijkl", W, W)
            - np.einsum("ikp,jpl->ijkl", W, W)
            - np.einsum("ijm,mkl->ijkl", bracket, W))


def covariant_curvature_derivative(W, Rf, ER):
    """(nabla_{E_m} R) in frame components given ``ER[m] = E_m(Rf)``."""
    return (ER
            - np.einsum("mip,pjkl->mijkl", W, Rf)
            - np.einsum("mjp,ipkl->mijkl", W, Rf)
            - np.einsum("mkp,ijpl->mijkl", W, Rf)
            - np.einsum("mlp,ijkp->mijkl", W, Rf))


# ---------------------------------------------------------------------------
# chart-backed model


class ChartModel(ManifoldModel):
    """A model given by a metric function on a coordinate domain."""

    def __init__(self, dim, metric_fn, domain_fn=None, christoffel_fn=None,
                 curvature_fn=None, name="chart", box=None):
        super().__init__(dim, name=name, box=box)
        self._metric = metric_fn
        self._domain = domain_fn
        self._christoffel = christoffel_fn
        self._curvature = curvature_fn

    def in_domain(self, x):
        return True if self._domain is None else bool(self._domain(x))

    def metric(self, x):
        return np.asarray(self._metric(np.asarray(x, float)), float)

    def christoffel(self, x):
        if self._christoffel is not None:
            return np.asarray(self._christoffel(np.asarray(x, float)), float)
        return super().christoffel(x)

    def coordinate_riemann(self, x):
        if self._curvature is not None:
            return np.asarray(self._curvature(np.asarray(x, float)), float)
        return super().coordinate_riemann(x)


# ---------------------------------------------------------------------------
# frame-backed model: left-invariant frame of a Lie group


def koszul_omega(C):
    """W from structure constants ``C[i, j, k]`` of [E_i, E_j] = sum_k C[i,j,k] E_k."""
    return 0.5 * (C - np.einsum("ikj->ijk", C) - np.einsum("jki->ijk", C))


class LieGroupModel(ManifoldModel):
    """Left-invariant orthonormal frame on a Lie group.

    The chart is given by exponential coordinates of the second kind,
    g(x) = exp(x1 e1) exp(x2 e2) ... exp(xn en).  The frame components,
    connection coefficients and curvature are constant in the frame.
    """

    backend = "frame"

    def __init__(self, C, name="lie_group", radius=1.5):
        C = np.asarray(C, float)
        n = C.shape[0]
        super().__init__(n, name=name, box=(-radius * np.ones(n), radius * np.ones(n)))
        self.C = C
        self.radius = radius
        self._W = koszul_omega(C)
        self._Rf = curvature_from_omega(self._W, np.zeros((n,) * 4))
        self._DRf = covariant_curvature_derivative(self._W, self._Rf, np.zeros((n,) * 5))
        # ad matrices: (ad e_i)[k, j] = C[i, j, k]
        self._ad = np.einsum("ijk->ikj", C)

    def in_domain(self, x):
        x = np.asarray(x, float)
        if np.max(np.abs(x)) >= self.radius:
            return False
        return abs(np.linalg.det(self._jacobian(x))) > 1e-6

    def _jacobian(self, x):
        """Columns: left-trivialized components of d/dx^a."""
        from scipy.linalg import expm

        n = self.dim
        J = np.empty((n, n))
        M = np.eye(n)
        for a in range(n - 1, -1, -1):
            e = np.zeros(n)
            e[a] = 1.0
            J[:, a] = M @ e
            M = M @ expm(-x[a] * self._ad[a])
        return J

    def metric(self, x):
        J = self._jacobian(np.asarray(x, float))
        return J.T @ J

    def frame(self, x):
        return np.linalg.inv(self._jacobian(np.asarray(x, float)))

    def coframe(self, x):
        return self._jacobian(np.asarray(x, float))

    def christoffel(self, x):
        x = np.asarray(x, float)
        E = self.frame(x)
        J = self._jacobian(x)
        n = self.dim
        dJ = np.empty((n, n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = H_FRAME
            dJ[a] = (self._jacobian(x + e) - self._jacobian(x - e)) / (2 * H_FRAME)
        inner = np.einsum("akb->kab", dJ) + np.einsum("ia,jb,ijk->kab", J, J, self._W)
        return np.einsum("ck,kab->cab", E, inner)

    def omega(self, x):
        return self._W.copy()

    def frame_curvature(self, x):
        return self._Rf.copy()

    def frame_curvature_derivative(self, x, h=H_CURV):
        return self._DRf.copy()

    def coordinate_riemann(self, x):
        return riemann_from_frame(self, x)


def riemann_from_frame(M, x):
    """Coordinate curvature R[l, i, j, k] from the frame curvature."""
    E = M.frame(x)
    J = np.linalg.inv(E)
    Rf = M.frame_curvature(x)
    return np.einsum("abcd,ai,bj,ck,ld->lijk", Rf, J, J, J, E)


# ---------------------------------------------------------------------------
# operations


@dataclass
class Geometry:
    g: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    frame: np.ndarray
    frame_curvature: np.ndarray
    curvature_operator: np.ndarray


def geometry_at(M: ManifoldModel, x, analytic=True) -> Geometry:
    """Metric, Christoffels, curvature and the Lambda^2 curvature operator at x.

    With ``analytic=False`` the finite-difference chart route is used even when
    the model has closed forms, which is how the closed forms are audited.
    """
    x = M.check(x)
    g = M.metric_checked(x)
    if analytic:
        G = M.christoffel(x)
        R = M.coordinate_riemann(x)
        Rf = M.frame_curvature(x)
    else:
        G = ManifoldModel.christoffel(M, x)
        R = ManifoldModel.coordinate_riemann(M, x)
        E = M.frame(x)
        Rf = np.einsum("lijk,ia,jb,kc,le,ed->abcd", R, E, E, E, g, E)
    return Geometry(g, G, R, M.frame(x), Rf, curvature_operator(Rf))


@dataclass
class GeodesicResult:
    x: np.ndarray
    v: np.ndarray
    ts: np.ndarray
    xs: np.ndarray
    us: np.ndarray  # frame components of the velocity

    def curve(self):
        return Curve.from_samples(self.ts, self.xs)


def _frame_geodesic_rhs(M, n):
    def rhs(t, y):
        x, u = y[:n], y[n:]
        E = M.frame(x)
        W = M.omega(x)
        return np.concatenate([E @ u, -omega_matrix(W, u) @ u])
    return rhs


def geodesic(M: ManifoldModel, x, v, T, step=1e-3, basis="chart", drift_tol=1e-5) -> GeodesicResult:
    """Integrate the geodesic with initial velocity v for time T (RK4)."""
    x = M.check(x)
    v = np.asarray(v, float)
    u0 = M.coframe(x) @ v if basis == "chart" else v.copy()
    n = M.dim
    steps = n_steps_for(T, step)
    h = T / steps
    rhs = _frame_geodesic_rhs(M, n)
    y = np.concatenate([x, u0])
    ts = [0.0]
    ys = [y]
    e0 = u0 @ u0
    t = 0.0
    for i in range(steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (i + 1) * h
        M.check(y[:n], t=ts[-1])
        ts.append(t)
        ys.append(y)
    ys = np.array(ys)
    u_end = ys[-1, n:]
    if e0 > 0 and abs(u_end @ u_end - e0) > drift_tol * e0:
        raise StepTooLarge(f"geodesic energy drift {abs(u_end @ u_end - e0) / e0:.2e}")
    x_end = ys[-1, :n]
    return GeodesicResult(x_end, M.frame(x_end) @ u_end, np.array(ts), ys[:, :n], ys[:, n:])


def exp_map(M, x, v, step=1e-3, basis="chart"):
    return geodesic(M, x, v, 1.0, step=step, basis=basis).x


def transport_matrices(M: ManifoldModel, curve: Curve, step=1e-3, keep=False):
    """Frame-component parallel transport matrices P(t) along ``curve``.

    P(t) w0 is the frame representation at curve(t) of the parallel field
    starting at w0.  Returns the final matrix, or ``(ts, Ps)`` if ``keep``.
    """
    n = M.dim

    def make_rhs(piece):
        def rhs(t, P):
            x = piece.position(t)
            u = M.coframe(x) @ piece.velocity(t)
            return -omega_matrix(M.omega(x), u) @ P
        return rhs

    M.check(curve.position(0.0), t=0.0)
    last = [0.0]

    def watch(t, P):
        M.check(curve.position(t), t=last[0])
        last[0] = t

    ts, Ps, _ = rk4_pieces(curve.pieces(), make_rhs, np.eye(n), step, watch)
    if keep:
        return ts, Ps
    return Ps[-1]


def parallel_transport(M: ManifoldModel, curve: Curve, v0: TangentVector, step=1e-3) -> TangentVector:
    """Transport v0 from curve(0) to curve(T)."""
    x0 = curve.position(0.0)
    if not np.allclose(x0, v0.base, atol=1e-9):
        from .errors import BaseMismatch
        raise BaseMismatch("v0 is not based at the start of the path")
    w0 = v0.frame_components(M)
    P = transport_matrices(M, curve, step)
    x1 = curve.position(curve.duration)
    w1 = P @ w0
    if v0.basis == "frame":
        return TangentVector(x1, w1, "frame")
    return TangentVector(x1, M.frame(x1) @ w1, "chart")


def connection_table(M: ManifoldModel, x, frame: Optional[Callable] = None, tol=1e-8) -> ConnectionTable:
    """Connection table of an orthonormal 3-frame at x.

    ``frame`` maps coordinates to a 3x3 matrix whose columns are the frame
    fields in chart components; ``None`` means the model's own frame.
    """
    if M.dim != 3:
        raise DimNot3("connection tables need a 3-manifold")
    x = M.check(x)
    if frame is None:
        return ConnectionTable.from_omega(M.omega(x))
    return ConnectionTable.from_omega(frame_omega(M, x, frame, tol))


def frame_omega(M, x, frame, tol=1e-8):
    """W for an arbitrary orthonormal frame field ``frame``."""
    F = np.asarray(frame(x), float)
    g = M.metric(x)
    if np.linalg.norm(F.T @ g @ F - np.eye(M.dim)) > tol:
        raise FrameNotOrthonormal("supplied frame is not orthonormal")
    n = M.dim
    G = M.christoffel(x)
    dF = np.empty((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = H_FRAME
        dF[a] = (np.asarray(frame(x + e)) - np.asarray(frame(x - e))) / (2 * H_FRAME)
    cov = np.einsum("ai,acj->cij", F, dF) + np.einsum("ai,cab,bj->cij", F, G, F)
    return np.einsum("ck,cd,dij->ijk", F, g, cov)


def frame_brackets_fd(frame, x, h=H_FRAME):
    """Coordinate Lie brackets [F_i, F_j] of a frame field, by finite differences."""
    x = np.asarray(x, float)
    F = np.asarray(frame(x), float)
    n = F.shape[0]
    dF = np.empty((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        dF[a] = (np.asarray(frame(x + e)) - np.asarray(frame(x - e))) / (2 * h)
    # [F_i, F_j]^c = F_i^a d_a F_j^c - F_j^a d_a F_i^c
    D = np.einsum("ai,acj->cij", F, dF)
    return D - np.transpose(D, (0, 2, 1))
