"""Named example manifolds with closed-form geometry.

Space forms carry the curvature convention used throughout the package: the
model ``space_form(n, k)`` has constant sectional curvature 1/k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from .errors import BadSpec
from .manifold_core import ChartModel, LieGroupModel, ManifoldModel


def constant_curvature_tensor(n, K):
    """Rf for R(X, Y)Z = K (g(Y, Z) X - g(X, Z) Y)."""
    d = np.eye(n)
    return K * (np.einsum("jk,il->ijkl", d, d) - np.einsum("ik,jl->ijkl", d, d))


def plane_curvature_tensor(K):
    """Rf whose curvature operator is diagonal on the frame planes.

    ``K[i, j]`` is the sectional curvature of span{E_i, E_j}.
    """
    n = K.shape[0]
    Rf = np.zeros((n,) * 4)
    for i in range(n):
        for j in range(n):
            if i != j:
                Rf[i, j, i, j] = -K[i, j]
                Rf[i, j, j, i] = K[i, j]
    return Rf


class EuclideanModel(ManifoldModel):
    backend = "frame"
    constant_curvature = 0.0

    def __init__(self, n, half_width=3.0):
        super().__init__(n, name=f"euclidean({n})",
                         box=(-half_width * np.ones(n), half_width * np.ones(n)))

    def metric(self, x):
        return np.eye(self.dim)

    def frame(self, x):
        return np.eye(self.dim)

    def coframe(self, x):
        return np.eye(self.dim)

    def christoffel(self, x):
        return np.zeros((self.dim,) * 3)

    def coordinate_riemann(self, x):
        return np.zeros((self.dim,) * 4)

    def omega(self, x):
        return np.zeros((self.dim,) * 3)

    def frame_curvature(self, x):
        return np.zeros((self.dim,) * 4)

    def frame_curvature_derivative(self, x, h=None):
        return np.zeros((self.dim,) * 5)


class PolarSpaceForm(ManifoldModel):
    """2D space form in geodesic polar coordinates (r, theta) about a pole.

    Metric dr^2 + S(r)^2 dtheta^2 with S(r) = a sin(r / a) for k = a^2 > 0
    and S(r) = b sinh(r / b) for k = -b^2 < 0.  The pole and, for k > 0, the
    antipode are excluded.
    """

    backend = "frame"

    def __init__(self, k):
        if k == 0:
            raise BadSpec("space_form needs k != 0; use euclidean for the flat case")
        self.k = float(k)
        self.scale = math.sqrt(abs(self.k))
        self.r_max = math.pi * self.scale if self.k > 0 else math.inf
        hi = min(self.r_max - 0.2 * self.scale, 3.0 * self.scale)
        super().__init__(2, name=f"space_form(2,{k:g})",
                         box=(np.array([0.2 * self.scale, -math.pi]), np.array([hi, math.pi])))
        self.constant_curvature = 1.0 / self.k

    def S(self, r):
        a = self.scale
        if self.k > 0:
            return a * math.sin(r / a), math.cos(r / a)
        return a * math.sinh(r / a), math.cosh(r / a)

    def in_domain(self, x):
        return 0.0 < x[0] < self.r_max

    def chart_gap(self, x, y):
        d = np.asarray(x, float) - np.asarray(y, float)
        d[1] = (d[1] + math.pi) % (2 * math.pi) - math.pi
        return float(np.linalg.norm(d))

    def metric(self, x):
        s, _ = self.S(x[0])
        return np.diag([1.0, s * s])

    def frame(self, x):
        s, _ = self.S(x[0])
        return np.diag([1.0, 1.0 / s])

    def coframe(self, x):
        s, _ = self.S(x[0])
        return np.diag([1.0, s])

    def christoffel(self, x):
        s, ds = self.S(x[0])
        G = np.zeros((2, 2, 2))
        G[0, 1, 1] = -s * ds
        G[1, 0, 1] = G[1, 1, 0] = ds / s
        return G

    def omega(self, x):
        s, ds = self.S(x[0])
        W = np.zeros((2, 2, 2))
        W[1, 1, 0] = -ds / s
        W[1, 0, 1] = ds / s
        return W

    def frame_curvature(self, x):
        return constant_curvature_tensor(2, 1.0 / self.k)

    def frame_curvature_derivative(self, x, h=None):
        return np.zeros((2,) * 5)

    def coordinate_riemann(self, x):
        from .manifold_core import riemann_from_frame
        return riemann_from_frame(self, x)

    def embed(self, x):
        """Point of the round sphere of radius sqrt(k) in R^3 (k > 0 only)."""
        a = self.scale
        r, th = x
        return a * np.array([math.sin(r / a) * math.cos(th), math.sin(r / a) * math.sin(th), math.cos(r / a)])

    def embedded_frame(self, x):
        """Columns: E_1, E_2 pushed into R^3, then the outward unit normal."""
        a = self.scale
        r, th = x
        s, c = math.sin(r / a), math.cos(r / a)
        e1 = np.array([c * math.cos(th), c * math.sin(th), -s])
        e2 = np.array([-math.sin(th), math.cos(th), 0.0])
        nrm = np.array([s * math.cos(th), s * math.sin(th), c])
        return np.column_stack([e1, e2, nrm])

    def chart_of(self, p):
        """Inverse of :meth:`embed`."""
        a = self.scale
        p = np.asarray(p, float) / a
        r = a * math.acos(max(-1.0, min(1.0, p[2])))
        return np.array([r, math.atan2(p[1], p[0])])


class StereographicSpaceForm(ManifoldModel):
    """Space form in stereographic (k > 0) or Poincare-ball (k < 0) coordinates.

    Metric 4 k^2 / (k + |u|^2)^2 |du|^2, conformal with e^phi = 2|k| / |k + |u|^2|.
    """

    backend = "frame"

    def __init__(self, n, k, half_width=None):
        if k == 0:
            raise BadSpec("space_form needs k != 0; use euclidean for the flat case")
        self.k = float(k)
        a = math.sqrt(abs(self.k))
        hw = 0.6 * a if half_width is None else half_width
        super().__init__(n, name=f"space_form({n},{k:g})", box=(-hw * np.ones(n), hw * np.ones(n)))
        self.constant_curvature = 1.0 / self.k
        self._Rf = constant_curvature_tensor(n, 1.0 / self.k)

    def in_domain(self, x):
        s = float(x @ x)
        if self.k < 0:
            return s < -self.k * (1 - 1e-9)
        return s < 1e4 * self.k

    def _conf(self, x):
        d = self.k + float(x @ x)
        ephi = 2.0 * abs(self.k) / abs(d)
        dphi = -2.0 * x / d
        return ephi, dphi

    def metric(self, x):
        ephi, _ = self._conf(x)
        return ephi ** 2 * np.eye(self.dim)

    def frame(self, x):
        ephi, _ = self._conf(x)
        return np.eye(self.dim) / ephi

    def coframe(self, x):
        ephi, _ = self._conf(x)
        return np.eye(self.dim) * ephi

    def christoffel(self, x):
        _, dp = self._conf(x)
        d = np.eye(self.dim)
        return (np.einsum("ca,b->cab", d, dp) + np.einsum("cb,a->cab", d, dp)
                - np.einsum("ab,c->cab", d, dp))

    def omega(self, x):
        ephi, dp = self._conf(x)
        d = np.eye(self.dim)
        return (np.einsum("ik,j->ijk", d, dp) - np.einsum("ij,k->ijk", d, dp)) / ephi

    def frame_curvature(self, x):
        return self._Rf.copy()

    def frame_curvature_derivative(self, x, h=None):
        return np.zeros((self.dim,) * 5)

    def coordinate_riemann(self, x):
        from .manifold_core import riemann_from_frame
        return riemann_from_frame(self, x)


# ---------------------------------------------------------------------------
# warped products


PROFILE_NAMES = ("cos", "cosh", "sinh", "exp", "affine", "sine_bump", "const_curvature")


def warping_profile(name, **p):
    """Return (f, f', f'', default interval) for a named warping function."""
    if name == "cos":
        return (math.cos, lambda r: -math.sin(r), lambda r: -math.cos(r), (-1.4, 1.4))
    if name == "cosh":
        return (math.cosh, math.sinh, math.cosh, (-2.0, 2.0))
    if name == "sinh":
        return (math.sinh, math.cosh, math.sinh, (0.1, 2.0))
    if name == "exp":
        return (math.exp, math.exp, math.exp, (-2.0, 2.0))
    if name == "affine":
        a, b = p.get("a", 1.0), p.get("b", 0.5)
        lo = -a / b + 0.1 if b > 0 else -2.0
        return (lambda r: a + b * r, lambda r: b, lambda r: 0.0, (max(lo, -2.0), 2.0))
    if name == "sine_bump":
        c, a, w = p.get("c", 1.5), p.get("a", 1.0), p.get("w", 1.0)
        if abs(a) >= c:
            raise BadSpec("sine_bump needs |a| < c so that f stays positive")
        return (lambda r: c + a * math.sin(w * r), lambda r: a * w * math.cos(w * r),
                lambda r: -a * w * w * math.sin(w * r), (-2.0, 2.0))
    if name == "const_curvature":
        K, a, b = p.get("K", 1.0), p.get("a", 1.0), p.get("b", 0.0)
        if a <= 0:
            raise BadSpec("const_curvature profile needs a > 0")
        if K > 0:
            s = math.sqrt(K)
            f = lambda r: a * math.cos(s * r) + b * math.sin(s * r) / s
            df = lambda r: -a * s * math.sin(s * r) + b * math.cos(s * r)
        elif K < 0:
            s = math.sqrt(-K)
            f = lambda r: a * math.cosh(s * r) + b * math.sinh(s * r) / s
            df = lambda r: a * s * math.sinh(s * r) + b * math.cosh(s * r)
        else:
            f = lambda r: a + b * r
            df = lambda r: b
        return (f, df, lambda r: -K * f(r), (-0.5, 0.5))
    raise BadSpec(f"unknown warping profile {name!r}")


class WarpedModel(ManifoldModel):
    """Warped product I x_f N with metric dr^2 + f(r)^2 h.

    Coordinates are (r, y).  For a 2D fibre the frame is (F1/f, d/dr, F2/f),
    so the radial field sits in the middle slot as in the 3D classification;
    for a 1D fibre it is (d/dr, F1/f).
    """

    backend = "frame"

    def __init__(self, f, df, ddf, interval, N: ManifoldModel, name="warped"):
        n = N.dim + 1
        lo, hi = interval
        Nlo, Nhi = N.box
        super().__init__(n, name=name, box=(np.concatenate([[lo + 0.05 * (hi - lo)], Nlo]),
                                            np.concatenate([[hi - 0.05 * (hi - lo)], Nhi])))
        self.f, self.df, self.ddf = f, df, ddf
        self.interval = (float(lo), float(hi))
        self.N = N
        self.radial = 1 if N.dim == 2 else 0
        self.tangential = [i for i in range(n) if i != self.radial]
        self.adapted_frame = N.dim == 2

    def split(self, x):
        return x[0], x[1:]

    def in_domain(self, x):
        r, y = self.split(x)
        lo, hi = self.interval
        return lo < r < hi and self.f(r) > 0 and self.N.in_domain(y)

    def metric(self, x):
        r, y = self.split(x)
        g = np.zeros((self.dim, self.dim))
        g[0, 0] = 1.0
        g[1:, 1:] = self.f(r) ** 2 * self.N.metric(y)
        return g

    def frame(self, x):
        r, y = self.split(x)
        E = np.zeros((self.dim, self.dim))
        E[0, self.radial] = 1.0
        FN = self.N.frame(y) / self.f(r)
        for a, ta in enumerate(self.tangential):
            E[1:, ta] = FN[:, a]
        return E

    def coframe(self, x):
        r, y = self.split(x)
        J = np.zeros((self.dim, self.dim))
        J[self.radial, 0] = 1.0
        JN = self.N.coframe(y) * self.f(r)
        for a, ta in enumerate(self.tangential):
            J[ta, 1:] = JN[a, :]
        return J

    def christoffel(self, x):
        r, y = self.split(x)
        f, df = self.f(r), self.df(r)
        gN = self.N.metric(y)
        GN = self.N.christoffel(y)
        m = self.N.dim
        G = np.zeros((self.dim,) * 3)
        G[0, 1:, 1:] = -f * df * gN
        for a in range(m):
            G[1 + a, 0, 1 + a] = df / f
            G[1 + a, 1 + a, 0] = df / f
        G[1:, 1:, 1:] = GN
        return G

    def omega(self, x):
        r, y = self.split(x)
        f, df = self.f(r), self.df(r)
        WN = self.N.omega(y)
        W = np.zeros((self.dim,) * 3)
        t = self.tangential
        rad = self.radial
        for a, ta in enumerate(t):
            W[ta, ta, rad] = -df / f
            W[ta, rad, ta] = df / f
            for b, tb in enumerate(t):
                for c, tc in enumerate(t):
                    W[ta, tb, tc] = WN[a, b, c] / f
        return W

    def plane_curvatures(self, x):
        r, y = self.split(x)
        f, df, ddf = self.f(r), self.df(r), self.ddf(r)
        K = np.zeros((self.dim, self.dim))
        for ta in self.tangential:
            K[ta, self.radial] = K[self.radial, ta] = -ddf / f
        if self.N.dim == 2:
            KN = -self.N.frame_curvature(y)[0, 1, 0, 1]
            t0, t1 = self.tangential
            K[t0, t1] = K[t1, t0] = (KN - df * df) / (f * f)
        return K

    def frame_curvature(self, x):
        return plane_curvature_tensor(self.plane_curvatures(x))

    def coordinate_riemann(self, x):
        from .manifold_core import riemann_from_frame
        return riemann_from_frame(self, x)

    def log_derivative(self, r):
        return self.df(r) / self.f(r)


class ProductModel(ManifoldModel):
    """Riemannian product with block-diagonal frame."""

    backend = "frame"

    def __init__(self, M1: ManifoldModel, M2: ManifoldModel):
        self.M1, self.M2 = M1, M2
        self.n1 = M1.dim
        super().__init__(M1.dim + M2.dim, name=f"{M1.name}x{M2.name}",
                         box=(np.concatenate([M1.box[0], M2.box[0]]), np.concatenate([M1.box[1], M2.box[1]])))

    def split(self, x):
        return x[:self.n1], x[self.n1:]

    def in_domain(self, x):
        a, b = self.split(x)
        return self.M1.in_domain(a) and self.M2.in_domain(b)

    def _block(self, fa, fb, order):
        n, n1 = self.dim, self.n1
        out = np.zeros((n,) * order)
        out[(slice(0, n1),) * order] = fa
        out[(slice(n1, n),) * order] = fb
        return out

    def metric(self, x):
        a, b = self.split(x)
        return self._block(self.M1.metric(a), self.M2.metric(b), 2)

    def frame(self, x):
        a, b = self.split(x)
        return self._block(self.M1.frame(a), self.M2.frame(b), 2)

    def coframe(self, x):
        a, b = self.split(x)
        return self._block(self.M1.coframe(a), self.M2.coframe(b), 2)

    def christoffel(self, x):
        a, b = self.split(x)
        return self._block(self.M1.christoffel(a), self.M2.christoffel(b), 3)

    def omega(self, x):
        a, b = self.split(x)
        return self._block(self.M1.omega(a), self.M2.omega(b), 3)

    def frame_curvature(self, x):
        a, b = self.split(x)
        return self._block(self.M1.frame_curvature(a), self.M2.frame_curvature(b), 4)

    def frame_curvature_derivative(self, x, h=1e-4):
        a, b = self.split(x)
        return self._block(self.M1.frame_curvature_derivative(a), self.M2.frame_curvature_derivative(b), 5)

    def coordinate_riemann(self, x):
        a, b = self.split(x)
        return self._block(self.M1.coordinate_riemann(a), self.M2.coordinate_riemann(b), 4)


# ---------------------------------------------------------------------------
# class M_beta groups


def mbeta_structure_constants(group, scale=1.0):
    """C[i, j, k] with [E_i, E_j] = sum_k C[i, j, k] E_k (0-based)."""
    C = np.zeros((3, 3, 3))

    def put(i, j, k, v):
        C[i, j, k] = v
        C[j, i, k] = -v

    if group == "so3":
        put(0, 1, 2, 1.0)
        put(1, 2, 0, 1.0)
        put(2, 0, 1, 1.0)
    elif group == "heisenberg":
        put(2, 0, 1, 1.0)
    elif group == "sl2":
        put(0, 1, 2, -1.0)
        put(1, 2, 0, -1.0)
        put(2, 0, 1, 1.0)
    else:
        raise BadSpec(f"unknown group {group!r}")
    return scale * C


# ---------------------------------------------------------------------------
# spec and factory


KINDS = ("euclidean", "space_form", "warped", "mbeta_group", "product", "surface")


@dataclass
class ManifoldSpec:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise BadSpec("manifold spec needs a 'kind' field")
        params = {k: v for k, v in d.items() if k != "kind"}
        return cls(d["kind"], params)

    def to_dict(self):
        return {"kind": self.kind, **self.params}


def _surface_metric(name, p):
    if name == "graph_bump":
        a = float(p.get("a", 0.5))

        def grad(x):
            e = math.exp(-(x @ x))
            return -2.0 * a * e * x

        def metric(x):
            gr = grad(x)
            return np.eye(len(x)) + np.outer(gr, gr)

        return metric
    if name == "anisotropic":
        a = float(p.get("a", 0.3))

        def metric(x):
            n = len(x)
            g = np.eye(n)
            g[0, 0] = 1.0 + a * x[1] ** 2
            if n > 2:
                g[2, 2] = 1.0 + a * math.sin(x[0])
            g[0, 1] = g[1, 0] = 0.5 * a * x[0] * x[1]
            return g

        return metric
    raise BadSpec(f"unknown surface metric {name!r}")


def make_manifold(spec) -> ManifoldModel:
    """Build a model from a :class:`ManifoldSpec` (or its dict form)."""
    if isinstance(spec, dict):
        spec = ManifoldSpec.from_dict(spec)
    kind, p = spec.kind, spec.params
    try:
        if kind == "euclidean":
            n = int(p.get("n", 2))
            if n < 1:
                raise BadSpec("euclidean needs n >= 1")
            return EuclideanModel(n)
        if kind == "space_form":
            n = int(p.get("n", 2))
            k = float(p["k"])
            if k == 0:
                raise BadSpec("space_form needs k != 0")
            chart = p.get("chart", "polar" if n == 2 else "stereographic")
            if chart == "polar":
                if n != 2:
                    raise BadSpec("polar chart is only available for n = 2")
                return PolarSpaceForm(k)
            if chart == "stereographic":
                return StereographicSpaceForm(n, k)
            raise BadSpec(f"unknown chart {chart!r}")
        if kind == "warped":
            prof = p.get("profile", "cos")
            f, df, ddf, interval = warping_profile(prof, **p.get("profile_params", {}))
            if "interval" in p:
                interval = tuple(p["interval"])
            N = make_manifold(p.get("N", {"kind": "euclidean", "n": 1}))
            lo, hi = interval
            for r in np.linspace(lo, hi, 41)[1:-1]:
                if f(r) <= 0:
                    raise BadSpec("warping function must be positive on the interval")
            return WarpedModel(f, df, ddf, interval, N, name=f"warped({prof})")
        if kind == "mbeta_group":
            group = p.get("group", "heisenberg")
            scale = float(p.get("scale", 1.0))
            if scale <= 0:
                raise BadSpec("scale must be positive")
            M = LieGroupModel(mbeta_structure_constants(group, scale), name=f"{group}({scale:g})",
                              radius=float(p.get("radius", 1.5)))
            M.adapted_frame = True
            if group == "so3":
                M.constant_curvature = scale * scale / 4.0
            return M
        if kind == "product":
            factors = p.get("factors")
            if not factors or len(factors) != 2:
                raise BadSpec("product needs two factors")
            return ProductModel(make_manifold(factors[0]), make_manifold(factors[1]))
        if kind == "surface":
            metric = p.get("metric_fn")
            n = int(p.get("n", 2))
            if metric is None:
                metric = _surface_metric(p.get("family", "graph_bump"), p)
            hw = float(p.get("half_width", 1.0))
            return ChartModel(n, metric, name=f"surface({p.get('family', 'custom')})",
                              box=(-hw * np.ones(n), hw * np.ones(n)))
    except KeyError as exc:
        raise BadSpec(f"{kind}: missing parameter {exc.args[0]!r}") from exc
    raise BadSpec(f"unknown manifold kind {kind!r}")


def sphere(k=1.0, n=2):
    return make_manifold({"kind": "space_form", "n": n, "k": k})


def plane(n=2):
    return EuclideanModel(n)
