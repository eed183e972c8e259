"""Extrinsic rolling of a round sphere on a plane in R^3.

The sphere of radius a is the polar-chart space form with k = a^2, embedded
centred at the origin; the plane is z = 0 with x^ -> (x^_1, x^_2, 0).  A
rolling map is a curve G(t) = (p(t), U(t)) of rigid motions together with a
development curve sigma(t) on the embedded sphere.  The contact point is
sigma^ = U sigma + p.

The normal alignment b = +-1 fixes U n = b e_z at contact, n the outward
normal.  With b = +1 the motion stays in SO(3) and the sphere touches the
plane from below; b = -1 puts the sphere above the plane at the price of an
orientation-reversing U.

Residuals reported along a path (names in ``RESIDUALS``):

* ``contact``: |(U sigma + p)_z|, the contact point leaves the plane;
* ``tangency``: tangential part of U n, the tangent planes disagree;
* ``slip``: |d/dt (U sigma + p) - U sigma'|;
* ``twist_tangential``: the tangent-to-tangent block of U' U^T;
* ``twist_normal``: the normal-to-normal block of U' U^T.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RollingTrajectory, SEElement, _fd4, _residuals
from .errors import BadSpec, ContactLost, InvalidState, ModeMismatch
from .manifold_core import Curve
from .ode import rk4_pieces
from .zoo import EuclideanModel, PolarSpaceForm

E_Z = np.array([0.0, 0.0, 1.0])
P_T = np.diag([1.0, 1.0, 0.0])
P_N = np.diag([0.0, 0.0, 1.0])
PLANE_FRAME = np.eye(3)[:, :2]
RESIDUALS = ("contact", "tangency", "slip", "twist_tangential", "twist_normal")
CONTACT_LOST = 1e-4


def embedded_pair(radius):
    """Sphere of the given radius (polar chart) and the Euclidean plane."""
    if radius <= 0:
        raise BadSpec("radius must be positive")
    return PolarSpaceForm(radius * radius), EuclideanModel(2)


def _check_pair(M, Mh=None):
    if not isinstance(M, PolarSpaceForm) or M.k <= 0:
        raise BadSpec("the extrinsic model needs a round sphere in the polar chart")
    if Mh is not None and not (isinstance(Mh, EuclideanModel) and Mh.dim == 2):
        raise BadSpec("the extrinsic model rolls onto the Euclidean plane")


def _check_b(b):
    b = float(np.asarray(b, float).ravel()[0])
    if abs(abs(b) - 1.0) > 1e-12:
        raise InvalidState("normal alignment b must be +1 or -1")
    return b


def _skew(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


@dataclass(frozen=True)
class RollingMapState:
    t: float
    G: SEElement
    sigma: np.ndarray


@dataclass
class ExtrinsicPath:
    ts: np.ndarray
    Us: np.ndarray
    ps: np.ndarray
    sigmas: np.ndarray
    sigma_dots: np.ndarray
    residuals: dict
    starts: list
    radius: float
    b: float
    mode: str = "R"
    meta: dict = field(default_factory=dict)

    def state(self, i):
        return RollingMapState(float(self.ts[i]), SEElement(self.Us[i], self.ps[i]), self.sigmas[i])

    @property
    def final(self):
        return self.state(-1)

    @property
    def contact_points(self):
        return np.einsum("kij,kj->ki", self.Us, self.sigmas) + self.ps

    def max_residual(self, name):
        return float(np.max(self.residuals[name]))

    def csv_header(self):
        return (["t", "p0", "p1", "p2"] + [f"U{i}{j}" for i in range(3) for j in range(3)]
                + ["sigma0", "sigma1", "sigma2"] + list(RESIDUALS))

    def csv_rows(self):
        for i, t in enumerate(self.ts):
            yield ([float(t)] + self.ps[i].tolist() + self.Us[i].ravel().tolist()
                   + self.sigmas[i].tolist() + [float(self.residuals[k][i]) for k in RESIDUALS])


def _path_residuals(ts, starts, Us, ps, sigmas, sigma_dots, radius):
    k = len(ts)
    hats = np.einsum("kij,kj->ki", Us, sigmas) + ps
    normals = sigmas / radius
    res = {
        "orthogonality": np.array([np.linalg.norm(U.T @ U - np.eye(3)) for U in Us]),
        "contact": np.abs(hats[:, 2]),
        "tangency": np.array([np.linalg.norm(P_T @ U @ nv) for U, nv in zip(Us, normals)]),
    }
    if k < 2:
        zero = np.zeros(k)
        res.update(slip=zero, twist_tangential=zero.copy(), twist_normal=zero.copy())
        return res
    dhat = _fd4(ts, hats, starts)
    dU = _fd4(ts, Us, starts)
    Om = np.einsum("kij,klj->kil", dU, Us)
    res["slip"] = np.linalg.norm(dhat - np.einsum("kij,kj->ki", Us, sigma_dots), axis=1)
    res["twist_tangential"] = np.array([np.linalg.norm(P_T @ O @ P_T) for O in Om])
    res["twist_normal"] = np.array([np.linalg.norm(P_N @ O @ P_N) for O in Om])
    return res


def _sigma_and_velocity(M, x, v):
    """Embedded point and velocity for chart position x and chart velocity v."""
    F = M.embedded_frame(x)
    return M.embed(x), F[:, :2] @ (M.coframe(x) @ v)


def integrate_rolling_map(M, curve: Curve, G0: SEElement, step=1e-3, b=1.0) -> ExtrinsicPath:
    """Roll the sphere along the development curve ``curve`` (polar chart of M).

    U' = [w]x U with w = -(b/a) e_z x (U sigma') keeps the tangent planes
    matched without twisting, and p' = -U' sigma removes the slip.
    """
    _check_pair(M)
    b = _check_b(b)
    a = M.scale
    x0 = M.check(curve.position(0.0))
    sigma0 = M.embed(x0)
    U0, p0 = np.asarray(G0.rotation, float), np.asarray(G0.translation, float)
    n0 = M.embedded_frame(x0)[:, 2]
    defect = max(abs((U0 @ sigma0 + p0)[2]), float(np.linalg.norm(U0 @ n0 - b * E_Z)),
                 float(np.linalg.norm(U0.T @ U0 - np.eye(3))))
    if defect > 1e-8:
        raise InvalidState(f"G0 does not put the sphere in contact with the plane (defect {defect:.2e})")

    def make_rhs(c):
        def rhs(t, y):
            U = y[:9].reshape(3, 3)
            x = c.position(t)
            sigma, sdot = _sigma_and_velocity(M, x, c.velocity(t))
            Om = _skew(-(b / a) * np.cross(E_Z, U @ sdot))
            dU = Om @ U
            return np.concatenate([dU.ravel(), -dU @ sigma])
        return rhs

    pieces = curve.pieces()

    def watch(t, y):
        U = y[:9].reshape(3, 3)
        # locate the piece to recover sigma(t)
        for t0, c in pieces:
            if t0 - 1e-12 <= t <= t0 + c.duration + 1e-12:
                x = c.position(t - t0)
                break
        nv = M.embed(x) / a
        tang = float(np.linalg.norm(P_T @ U @ nv))
        if tang > CONTACT_LOST:
            raise ContactLost(f"tangency residual {tang:.2e} at t={t:.6g}")

    y0 = np.concatenate([U0.ravel(), p0])
    ts, ys, starts = rk4_pieces(pieces, make_rhs, y0, step, watch)
    k = len(ts)
    Us = ys[:, :9].reshape(k, 3, 3)
    ps = ys[:, 9:]
    sigmas = np.empty((k, 3))
    sdots = np.empty((k, 3))
    bounds = starts + [k - 1]
    for j, (t0, c) in enumerate(pieces):
        lo = bounds[j] if j == 0 else bounds[j] + 1
        for i in range(lo, bounds[j + 1] + 1):
            sigmas[i], sdots[i] = _sigma_and_velocity(M, c.position(ts[i] - t0), c.velocity(ts[i] - t0))
    if k == 1 or not pieces:
        sigmas[0], sdots[0] = sigma0, 0.0
    res = _path_residuals(ts, starts, Us, ps, sigmas, sdots, a)
    return ExtrinsicPath(ts, Us, ps, sigmas, sdots, res, starts, a, b, "R",
                         {"step": step, "source": "integrated"})


def contact_frame(M, x, x_hat, b=1.0):
    """G = (p, U) placing the point x of the sphere on x^ with A = identity in frames."""
    _check_pair(M)
    return _assemble(M, np.asarray(x, float), np.asarray(x_hat, float), np.eye(2), _check_b(b))


def _assemble(M, x, xh, A, b):
    F = M.embedded_frame(x)
    U = PLANE_FRAME @ A @ F[:, :2].T + b * np.outer(E_Z, F[:, 2])
    sigma = M.embed(x)
    p = np.array([xh[0], xh[1], 0.0]) - U @ sigma
    return SEElement(U, p)


def correspondence(M, Mh, traj: RollingTrajectory, b=1.0, allow_ns=False) -> ExtrinsicPath:
    """Extrinsic picture of an intrinsic trajectory of Q(sphere, plane).

    U(t) = iota^_* A(t) iota_*^{-1} + b e_z n(t)^T and p(t) = sigma^(t) - U(t) sigma(t).
    The normal part stays b because unit normals of a hypersurface are parallel
    for the normal connection.  No-spin trajectories are refused unless
    ``allow_ns`` is set; their slip shows up in the ``slip`` residual.
    """
    _check_pair(M, Mh)
    b = _check_b(b)
    if traj.mode != "R" and not allow_ns:
        raise ModeMismatch("trajectory is not tangent to the rolling distribution")
    k = len(traj.ts)
    Us = np.empty((k, 3, 3))
    ps = np.empty((k, 3))
    sigmas = np.empty((k, 3))
    sdots = np.empty((k, 3))
    for i in range(k):
        G = _assemble(M, traj.xs[i], traj.xhats[i], traj.As[i], b)
        Us[i], ps[i] = G.rotation, G.translation
        sigmas[i] = M.embed(traj.xs[i])
        sdots[i] = M.embedded_frame(traj.xs[i])[:, :2] @ traj.us[i]
    starts = list(traj.meta.get("pieces", [0]))
    res = _path_residuals(traj.ts, starts, Us, ps, sigmas, sdots, M.scale)
    return ExtrinsicPath(np.array(traj.ts), Us, ps, sigmas, sdots, res, starts, M.scale, b, traj.mode,
                         {"source": "correspondence"})


def inverse_correspondence(M, Mh, path: ExtrinsicPath) -> RollingTrajectory:
    """Recover (x, x^; A) from a rolling map: A = iota^_*^{-1} U iota_* on tangent planes."""
    _check_pair(M, Mh)
    k = len(path.ts)
    xs = np.array([M.chart_of(s) for s in path.sigmas])
    xs[:, 1] = np.unwrap(xs[:, 1])
    hats = path.contact_points
    xhats = hats[:, :2].copy()
    As = np.empty((k, 2, 2))
    us = np.empty((k, 2))
    uhats = np.empty((k, 2))
    for i in range(k):
        F = M.embedded_frame(xs[i])[:, :2]
        As[i] = PLANE_FRAME.T @ path.Us[i] @ F
        us[i] = F.T @ path.sigma_dots[i]
    if path.mode == "R":
        uhats = np.einsum("kij,kj->ki", As, us)
    else:
        uhats = _fd4(path.ts, xhats, path.starts) if k > 1 else np.zeros((k, 2))
    res = _residuals(M, Mh, path.ts, xs, xhats, As, us, uhats, path.starts, path.mode)
    return RollingTrajectory(np.array(path.ts), xs, xhats, As, us, uhats, res, path.mode,
                             {"pieces": list(path.starts), "source": "inverse_correspondence"})


def rotation_about_normal(U0, U1):
    """Angle of U1 U0^T about e_z, assuming the product fixes e_z."""
    R = U1 @ U0.T
    return math.atan2(R[1, 0], R[0, 0])
