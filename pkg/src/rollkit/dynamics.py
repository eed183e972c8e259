"""Rolling along prescribed curves: the no-spin and the rolling systems.

All integration happens in orthonormal frames.  In mode "R" the curve on M
is prescribed and (x^, A) follow from no slipping and no spinning; in mode
"NS" both base curves are prescribed and only A evolves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import null_space

from .errors import (BaseMismatch, DimMismatch, LoopNotClosed, NotFlatTarget,
                     StepTooLarge)
from .manifold_core import (Curve, ManifoldModel, TangentVector, omega_matrix,
                            transport_matrices)
from .ode import rk4_pieces
from .state_space import StatePoint, isometry_residual, orthonormalize, require_valid
from .zoo import EuclideanModel, ProductModel


@dataclass(frozen=True)
class _PathPiece:
    curve: Curve
    curve_hat: Optional[Curve]

    @property
    def duration(self):
        return self.curve.duration


@dataclass
class ControlPath:
    """Prescribed motion: a curve on M (mode R) or a pair of curves (mode NS)."""

    curve: Curve
    curve_hat: Optional[Curve] = None
    mode: str = "R"

    def __post_init__(self):
        if self.mode not in ("R", "NS"):
            raise ValueError("mode must be 'R' or 'NS'")
        if self.mode == "NS" and self.curve_hat is None:
            raise ValueError("mode NS needs a curve on M^ as well")
        if self.mode == "NS" and abs(self.curve.duration - self.curve_hat.duration) > 1e-12:
            raise ValueError("both curves must share the same duration")

    @property
    def duration(self):
        return self.curve.duration

    @classmethod
    def from_samples(cls, ts, xs, xs_hat=None):
        c = Curve.from_samples(ts, xs)
        if xs_hat is None:
            return cls(c)
        return cls(c, Curve.from_samples(ts, xs_hat), "NS")

    def pieces(self):
        if self.mode == "R":
            return [(t0, _PathPiece(c, None)) for t0, c in self.curve.pieces()]
        a, b = self.curve.pieces(), self.curve_hat.pieces()
        if len(a) != len(b) or any(abs(p[0] - r[0]) > 1e-12 for p, r in zip(a, b)):
            a, b = [(0.0, self.curve)], [(0.0, self.curve_hat)]
        return [(t0, _PathPiece(c, ch)) for (t0, c), (_, ch) in zip(a, b)]


@dataclass
class RollingTrajectory:
    ts: np.ndarray
    xs: np.ndarray
    xhats: np.ndarray
    As: np.ndarray  # frame matrices
    us: np.ndarray  # frame velocity on M
    uhats: np.ndarray  # frame velocity on M^
    residuals: dict
    mode: str = "R"
    meta: dict = field(default_factory=dict)

    def state(self, i):
        return StatePoint(self.xs[i], self.xhats[i], self.As[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self.ts))]

    @property
    def final(self):
        return self.state(-1)

    def max_residual(self, name):
        r = self.residuals[name]
        return float(np.max(r)) if len(r) else 0.0

    def csv_header(self):
        n, nh = self.xs.shape[1], self.xhats.shape[1]
        cols = ["t"] + [f"x{i}" for i in range(n)] + [f"x_hat{i}" for i in range(nh)]
        cols += [f"A{i}{j}" for i in range(nh) for j in range(n)]
        return cols + ["defect_iso", "defect_noslip", "defect_nospin"]

    def csv_rows(self):
        r = self.residuals
        for i, t in enumerate(self.ts):
            yield ([float(t)] + self.xs[i].tolist() + self.xhats[i].tolist() + self.As[i].ravel().tolist()
                   + [float(r["isometry_defect"][i]), float(r["noslip_defect"][i]), float(r["nospin_defect"][i])])


@dataclass(frozen=True)
class SEElement:
    rotation: np.ndarray
    translation: np.ndarray

    def star(self, other: "SEElement") -> "SEElement":
        """(v, L) * (u, K) = (L u + v, L K)."""
        return SEElement(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def inverse(self):
        Rt = np.linalg.inv(self.rotation)
        return SEElement(Rt, -Rt @ self.translation)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.zeros(n))

    def matrix(self):
        n = len(self.translation)
        H = np.eye(n + 1)
        H[:n, :n] = self.rotation
        H[:n, n] = self.translation
        return H

    def orthogonality_defect(self):
        return float(np.linalg.norm(self.rotation.T @ self.rotation - np.eye(len(self.translation))))

    @property
    def angle(self):
        """Rotation angle in (-pi, pi] (2D only)."""
        R = self.rotation
        return math.atan2(R[1, 0], R[0, 0])

    def to_dict(self):
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


# ---------------------------------------------------------------------------
# residual series


def _fd4(ts, ys, starts):
    """Fourth-order finite-difference derivative of samples, piece by piece."""
    out = np.zeros_like(ys)
    bounds = list(starts) + [len(ts) - 1]
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = b - a + 1
        if m < 5:
            if m >= 2:
                out[a:b + 1] = np.gradient(ys[a:b + 1], ts[a:b + 1], axis=0)
            continue
        h = (ts[b] - ts[a]) / (m - 1)
        y = ys[a:b + 1]
        d = np.empty_like(y)
        d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
        d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
        d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
        d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
        d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
        out[a:b + 1] = d
    return out


def _residuals(M, Mh, ts, xs, xhats, As, us, uhats, starts, mode):
    """Isometry, no-slip and no-spin defects along the samples.

    The no-slip and no-spin defects compare finite-difference derivatives of
    the recorded samples with the constraint values, so they measure how well
    the discrete trajectory satisfies the constraints.
    """
    k = len(ts)
    iso = np.array([isometry_residual(A) for A in As])
    if k < 2:
        return {"isometry_defect": iso, "noslip_defect": np.zeros(k), "nospin_defect": np.zeros(k)}
    dxh = _fd4(ts, xhats, starts)
    dA = _fd4(ts, As, starts)
    noslip = np.empty(k)
    nospin = np.empty(k)
    for i in range(k):
        uh_fd = Mh.coframe(xhats[i]) @ dxh[i]
        if mode == "R":
            noslip[i] = np.linalg.norm(uh_fd - As[i] @ us[i])
        else:
            # the slip of a no-spin motion; nonzero in general
            noslip[i] = np.linalg.norm(uhats[i] - As[i] @ us[i])
        horiz = As[i] @ omega_matrix(M.omega(xs[i]), us[i]) - omega_matrix(Mh.omega(xhats[i]), uhats[i]) @ As[i]
        nospin[i] = np.linalg.norm(dA[i] - horiz)
    return {"isometry_defect": iso, "noslip_defect": noslip, "nospin_defect": nospin}


# ---------------------------------------------------------------------------
# integration


def integrate_rolling(M: ManifoldModel, Mh: ManifoldModel, q0: StatePoint, path: ControlPath,
                      step=1e-3, max_defect=None, reorthonormalize=False, state_tol=1e-8,
                      residuals=True) -> RollingTrajectory:
    """Integrate the rolling (mode R) or no-spin (mode NS) system by RK4."""
    require_valid(M, Mh, q0, state_tol)
    n, nh = M.dim, Mh.dim
    A0 = q0.frame_A(M, Mh)
    if not np.allclose(path.curve.position(0.0), q0.x, atol=1e-9):
        raise BaseMismatch("path does not start at x0")
    if path.mode == "NS" and not np.allclose(path.curve_hat.position(0.0), q0.x_hat, atol=1e-9):
        raise BaseMismatch("path on M^ does not start at x^0")

    def make_rhs(piece):
        c, ch = piece.curve, piece.curve_hat
        if path.mode == "R":
            def rhs(t, y):
                x = c.position(t)
                xh = y[:nh]
                A = y[nh:].reshape(nh, n)
                u = M.coframe(x) @ c.velocity(t)
                uh = A @ u
                dA = A @ omega_matrix(M.omega(x), u) - omega_matrix(Mh.omega(xh), uh) @ A
                return np.concatenate([Mh.frame(xh) @ uh, dA.ravel()])
        else:
            def rhs(t, y):
                x, xh = c.position(t), ch.position(t)
                A = y.reshape(nh, n)
                u = M.coframe(x) @ c.velocity(t)
                uh = Mh.coframe(xh) @ ch.velocity(t)
                dA = A @ omega_matrix(M.omega(x), u) - omega_matrix(Mh.omega(xh), uh) @ A
                return dA.ravel()
        return rhs

    last = [0.0]

    def watch(t, y):
        M.check(path.curve.position(t), t=last[0])
        if path.mode == "R":
            Mh.check(y[:nh], t=last[0])
            A = y[nh:].reshape(nh, n)
        else:
            Mh.check(path.curve_hat.position(t), t=last[0])
            A = y.reshape(nh, n)
        if max_defect is not None:
            d = isometry_residual(A)
            if d > max_defect:
                raise StepTooLarge(f"isometry defect {d:.3e} exceeds {max_defect:.3e} at t={t:.6g}")
        if reorthonormalize:
            A[...] = orthonormalize(A)
        last[0] = t

    y0 = np.concatenate([q0.x_hat, A0.ravel()]) if path.mode == "R" else A0.ravel()
    pieces = path.pieces()
    ts, ys, starts = rk4_pieces(pieces, make_rhs, y0, step, watch)

    # sample-wise quantities, evaluated on the side of each piece they belong to
    k = len(ts)
    xs = np.empty((k, n))
    us = np.empty((k, n))
    xhats = np.empty((k, nh))
    uhats = np.empty((k, nh))
    As = ys[:, nh:].reshape(k, nh, n) if path.mode == "R" else ys.reshape(k, nh, n)
    bounds = starts + [k - 1]
    for p, (t0, piece) in enumerate(pieces):
        c, ch = piece.curve, piece.curve_hat
        lo = bounds[p] if p == 0 else bounds[p] + 1
        for i in range(lo, bounds[p + 1] + 1):
            tl = ts[i] - t0
            xs[i] = c.position(tl)
            us[i] = M.coframe(xs[i]) @ c.velocity(tl)
            if path.mode == "R":
                xhats[i] = ys[i, :nh]
                uhats[i] = As[i] @ us[i]
            else:
                xhats[i] = ch.position(tl)
                uhats[i] = Mh.coframe(xhats[i]) @ ch.velocity(tl)
    if k == 1 or not pieces:
        xs[0], xhats[0] = q0.x, q0.x_hat
        us[0], uhats[0] = 0.0, 0.0
    if residuals:
        res = _residuals(M, Mh, ts, xs, xhats, As, us, uhats, starts, path.mode)
    else:
        res = {"isometry_defect": np.array([isometry_residual(A) for A in As]),
               "noslip_defect": np.zeros(k), "nospin_defect": np.zeros(k)}
    if path.duration == 0:
        ts, xs, xhats, As, us, uhats = ts[:1], xs[:1], xhats[:1], As[:1], us[:1], uhats[:1]
        res = {key: v[:1] for key, v in res.items()}
    return RollingTrajectory(ts, xs, xhats, As.copy(), us, uhats, res, path.mode,
                             {"step": step, "integrator_order": 4, "pieces": starts})


def _hermite_curve(ts, xs, dxs):
    spline = CubicHermiteSpline(ts, xs, dxs, axis=0)
    d = spline.derivative()
    return Curve(lambda t: spline(t), lambda t: d(t), ts[-1])


def trajectory_curves(M, Mh, traj: RollingTrajectory):
    """Hermite interpolants of the two base curves of a trajectory."""
    dx = np.array([M.frame(x) @ u for x, u in zip(traj.xs, traj.us)])
    dxh = np.array([Mh.frame(x) @ u for x, u in zip(traj.xhats, traj.uhats)])
    return _hermite_curve(traj.ts, traj.xs, dx), _hermite_curve(traj.ts, traj.xhats, dxh)


def factorization_error(M, Mh, traj: RollingTrajectory, step=1e-3, curve=None):
    """|A(T) - P^(x^) A0 P(x)^{-1}| with both transports integrated on their own.

    The curve on M is the prescribed one when given; the curve on M^ is the
    trajectory's own, interpolated through its samples and velocities.
    """
    c, ch = trajectory_curves(M, Mh, traj)
    if curve is not None:
        c = curve
    P = transport_matrices(M, c, step)
    Ph = transport_matrices(Mh, ch, step)
    pred = Ph @ traj.As[0] @ np.linalg.inv(P)
    return float(np.linalg.norm(traj.As[-1] - pred))


def roll_geodesic(M, Mh, q0: StatePoint, v, T, step=1e-3, state_tol=1e-8) -> RollingTrajectory:
    """Rolling along the geodesic with initial velocity v, without the rolling ODE.

    Both base curves are geodesics (the second with initial velocity A0 v) and
    A(t) = P^(t) A0 P(t)^{-1}, where each P is the transport along its
    geodesic.  Velocities stay parallel, so u(t) = P(t) u0.
    """
    require_valid(M, Mh, q0, state_tol)
    A0 = q0.frame_A(M, Mh)
    if isinstance(v, TangentVector):
        if not np.allclose(v.base, q0.x, atol=1e-12):
            raise BaseMismatch("v is not based at x0")
        u0 = v.frame_components(M)
    else:
        u0 = np.asarray(v, float)
    uh0 = A0 @ u0

    def side(Model, x0, w0):
        m = Model.dim

        def rhs(t, y):
            x = y[:m]
            P = y[m:].reshape(m, m)
            u = P @ w0
            return np.concatenate([Model.frame(x) @ u, (-omega_matrix(Model.omega(x), u) @ P).ravel()])

        last = [0.0]

        def watch(t, y):
            Model.check(y[:m], t=last[0])
            last[0] = t

        piece = Curve.constant(x0, T)
        ts, ys, _ = rk4_pieces([(0.0, piece)], lambda c: rhs, np.concatenate([x0, np.eye(m).ravel()]), step, watch)
        return ts, ys[:, :m], ys[:, m:].reshape(-1, m, m)

    ts, xs, Ps = side(M, q0.x, u0)
    _, xhs, Phs = side(Mh, q0.x_hat, uh0)
    As = np.array([Ph @ A0 @ np.linalg.inv(P) for P, Ph in zip(Ps, Phs)])
    us = np.array([P @ u0 for P in Ps])
    uhs = np.array([Ph @ uh0 for Ph in Phs])
    res = _residuals(M, Mh, ts, xs, xhs, As, us, uhs, [0], "R")
    return RollingTrajectory(ts, xs, xhs, As, us, uhs, res, "R", {"step": step, "closed_form": True})


def geodesic_curve(M, x0, v, T, step=1e-3):
    """The geodesic as a Curve (Hermite interpolant of the RK4 samples)."""
    from .manifold_core import geodesic
    g = geodesic(M, x0, v, T, step=step)
    dx = np.array([M.frame(x) @ u for x, u in zip(g.xs, g.us)])
    return _hermite_curve(g.ts, g.xs, dx)


# ---------------------------------------------------------------------------
# flat targets


@dataclass
class AntiDevelopment:
    ts: np.ndarray
    points: np.ndarray  # frame components at x0
    transports: np.ndarray

    def curve(self):
        return Curve.from_samples(self.ts, self.points)


def anti_develop(M, curve: Curve, x0=None, step=1e-3) -> AntiDevelopment:
    """Lambda(t) = int_0^t P(s)^{-1} u(s) ds, in frame components at x0."""
    start = curve.position(0.0)
    if x0 is not None and not np.allclose(start, x0, atol=1e-9):
        raise BaseMismatch("curve does not start at x0")
    n = M.dim

    def make_rhs(piece):
        def rhs(t, y):
            x = piece.position(t)
            P = y[:n * n].reshape(n, n)
            u = M.coframe(x) @ piece.velocity(t)
            dP = -omega_matrix(M.omega(x), u) @ P
            return np.concatenate([dP.ravel(), np.linalg.solve(P, u)])
        return rhs

    M.check(start, t=0.0)
    last = [0.0]

    def watch(t, y):
        M.check(curve.position(t), t=last[0])
        last[0] = t

    ts, ys, _ = rk4_pieces(curve.pieces(), make_rhs, np.concatenate([np.eye(n).ravel(), np.zeros(n)]), step, watch)
    return AntiDevelopment(ts, ys[:, n * n:], ys[:, :n * n].reshape(-1, n, n))


def is_flat_euclidean(Mh):
    return isinstance(Mh, EuclideanModel)


def roll_onto_flat(M, Mh, q0: StatePoint, curve: Curve, step=1e-3, loop_tol=1e-6,
                   require_loop=False, state_tol=1e-8):
    """Rolling onto Euclidean space in closed form.

    x^(t) = x^0 + A0 Lambda(t) and A(t) = A0 P(t)^{-1}.  For a loop the
    second return value is rho = (x^(T) - x^0, A(T) A0^{-1}), else None.
    """
    if not is_flat_euclidean(Mh):
        raise NotFlatTarget("roll_onto_flat needs a Euclidean target")
    if M.dim != Mh.dim:
        raise DimMismatch("roll_onto_flat needs n = n^")
    require_valid(M, Mh, q0, state_tol)
    A0 = q0.frame_A(M, Mh)
    ad = anti_develop(M, curve, q0.x, step)
    k = len(ad.ts)
    xhats = q0.x_hat + ad.points @ A0.T
    As = np.array([A0 @ np.linalg.inv(P) for P in ad.transports])
    xs = np.empty((k, M.dim))
    us = np.empty((k, M.dim))
    pieces = curve.pieces()
    for i, t in enumerate(ad.ts):
        p = max(j for j, (t0, _) in enumerate(pieces) if t0 <= t + 1e-12) if t > 0 else 0
        t0, c = pieces[p]
        tl = min(t - t0, c.duration)
        xs[i] = c.position(tl)
        us[i] = M.coframe(xs[i]) @ c.velocity(tl)
    uhats = np.einsum("kij,kj->ki", As, us)
    iso = np.array([isometry_residual(A) for A in As])
    res = {"isometry_defect": iso, "noslip_defect": np.zeros(k), "nospin_defect": np.zeros(k)}
    traj = RollingTrajectory(ad.ts, xs, xhats, As, us, uhats, res, "R", {"step": step, "closed_form": True})
    gap = M.chart_gap(curve.position(curve.duration), curve.position(0.0))
    if gap >= loop_tol:
        if require_loop:
            raise LoopNotClosed(f"endpoint gap {gap:.3e} exceeds {loop_tol:.1e}")
        return traj, None
    rho = SEElement(As[-1] @ np.linalg.inv(A0), xhats[-1] - q0.x_hat)
    return traj, rho


# ---------------------------------------------------------------------------
# development map


@dataclass
class CartanReport:
    radii: np.ndarray
    distortion: np.ndarray  # max over directions, per radius
    max_distortion: float
    max_rol: float
    exponent: Optional[float]

    def to_dict(self):
        return {"radii": self.radii.tolist(), "distortion": self.distortion.tolist(),
                "max_distortion": self.max_distortion, "max_rol": self.max_rol,
                "exponent": self.exponent}


def _exp_chart(M, x0, V, step):
    """exp_{x0} of frame components V."""
    from .manifold_core import geodesic
    return geodesic(M, x0, V, 1.0, step=step, basis="frame").x


def _dexp(M, x0, V, step, h=1e-5):
    n = M.dim
    D = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        D[:, j] = (_exp_chart(M, x0, V + e, step) - _exp_chart(M, x0, V - e, step)) / (2 * h)
    return D


def cartan_map(M, Mh, q0: StatePoint, radius, n_dirs=6, n_radii=4, step=1e-3, seed=0, state_tol=1e-8):
    """Sample Phi = exp^ o A0 o exp^{-1} on geodesic spheres and measure its isometry defect.

    The distortion at y = exp(V) is |F^T F - I| with F the frame matrix of
    d Phi = d(exp^ o A0)(V) d(exp)(V)^{-1}.  Rol is sampled along the rolled
    geodesics t -> exp(t X).
    """
    from .curvature import rol_frame

    require_valid(M, Mh, q0, state_tol)
    A0 = q0.frame_A(M, Mh)
    n = M.dim
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = np.linspace(radius / n_radii, radius, n_radii)
    dist = np.zeros(n_radii)
    for a, s in enumerate(radii):
        for X in dirs:
            V = s * X
            y = _exp_chart(M, q0.x, V, step)
            yh = _exp_chart(Mh, q0.x_hat, A0 @ V, step)
            D = _dexp(M, q0.x, V, step)
            Dh = _dexp(Mh, q0.x_hat, A0 @ V, step) @ A0
            F = Mh.coframe(yh) @ Dh @ np.linalg.solve(D, M.frame(y))
            dist[a] = max(dist[a], float(np.linalg.norm(F.T @ F - np.eye(n))))
    max_rol = 0.0
    E = np.eye(n)
    for X in dirs:
        traj = roll_geodesic(M, Mh, q0, X, radius, step=max(step, radius / 200))
        for i in range(0, len(traj.ts), max(1, len(traj.ts) // 20)):
            Rf = M.frame_curvature(traj.xs[i])
            Rfh = Mh.frame_curvature(traj.xhats[i])
            for p in range(n):
                for r in range(p + 1, n):
                    max_rol = max(max_rol, float(np.linalg.norm(rol_frame(traj.As[i], Rf, Rfh, E[p], E[r]))))
    exponent = None
    if np.all(dist > 1e-9):
        exponent = float(np.polyfit(np.log(radii), np.log(dist), 1)[0])
    return CartanReport(radii, dist, float(dist.max()), max_rol, exponent)


# ---------------------------------------------------------------------------
# codimension one


@dataclass
class Codim1Lift:
    q_lift: StatePoint
    target: ManifoldModel
    projection_error: float


def codim1_project(q1: StatePoint) -> StatePoint:
    """Pi: forget the last target coordinate and the last row of A."""
    return StatePoint(q1.x, q1.x_hat[:-1], q1.A[:-1], q1.basis)


def codim1_lift_project(M, Mh, q: StatePoint, a, state_tol=1e-8) -> Codim1Lift:
    """Lift q in Q(M, M^), dim M^ = dim M - 1, to Q(M, M^ x R) at height a.

    The new row of A is the unit kernel vector of A, signed so that det = +1.
    """
    if M.dim != Mh.dim + 1:
        raise DimMismatch("codim1 lift needs dim M = dim M^ + 1")
    require_valid(M, Mh, q, state_tol)
    A = q.frame_A(M, Mh)
    k = null_space(A)[:, 0]
    A1 = np.vstack([A, k])
    if np.linalg.det(A1) < 0:
        A1[-1] = -k
    target = ProductModel(Mh, EuclideanModel(1))
    q1 = StatePoint(q.x, np.concatenate([q.x_hat, [float(a)]]), A1)
    back = codim1_project(q1)
    err = float(max(np.max(np.abs(back.x - q.x)), np.max(np.abs(back.x_hat - q.x_hat)),
                    np.max(np.abs(back.A - A))))
    return Codim1Lift(q1, target, err)


# ---------------------------------------------------------------------------
# test curves and symmetry checks


def random_curve(M, center, amplitude, length, modes=4, seed=0) -> Curve:
    """Smooth random chart curve of prescribed metric length.

    x(t) = center + sum_k a_k sin(k t) + b_k (cos(k t) - 1), coefficients
    scaled so that coordinate i never moves more than amplitude[i] from the
    centre; the duration is chosen so that the g-length equals ``length``.
    """
    from scipy.integrate import quad
    from scipy.optimize import brentq

    center = np.asarray(center, float)
    amp = np.broadcast_to(np.asarray(amplitude, float), center.shape)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(modes, center.size))
    b = rng.normal(size=(modes, center.size))
    bound = np.abs(a).sum(axis=0) + 2 * np.abs(b).sum(axis=0)
    a *= amp / bound
    b *= amp / bound
    k = np.arange(1, modes + 1)[:, None]

    def pos(t):
        return center + (a * np.sin(k * t) + b * (np.cos(k * t) - 1)).sum(axis=0)

    def vel(t):
        return (k * (a * np.cos(k * t) - b * np.sin(k * t))).sum(axis=0)

    def speed(t):
        v = vel(t)
        return math.sqrt(v @ M.metric(pos(t)) @ v)

    def arc(T):
        return quad(speed, 0.0, T, limit=400, epsabs=1e-12, epsrel=1e-12)[0]

    hi = 1.0
    while arc(hi) < length:
        hi *= 2.0
    T = brentq(lambda s: arc(s) - length, 0.0, hi, xtol=1e-13)
    for t in np.linspace(0.0, T, 200):
        M.check(pos(t))
    return Curve(pos, vel, T)


def _state_gap(M, Mh, q, p):
    return max(M.chart_gap(q.x, p.x), Mh.chart_gap(q.x_hat, p.x_hat),
               float(np.max(np.abs(q.frame_A(M, Mh) - p.frame_A(M, Mh)))))


def transpose_duality_error(M, Mh, q0: StatePoint, curve: Curve, step=1e-3) -> float:
    """Roll (M, M^) along curve, then roll (M^, M) from the transposed state along x^(t).

    The second run must reproduce the transposed states of the first; the
    return value is the sup-norm gap over the samples.
    """
    from .state_space import transpose_state

    t1 = integrate_rolling(M, Mh, q0, ControlPath(curve), step)
    _, ch = trajectory_curves(M, Mh, t1)
    t2 = integrate_rolling(Mh, M, transpose_state(M, Mh, q0.in_frames(M, Mh)), ControlPath(ch), step)
    gap = 0.0
    for i in range(len(t1.ts)):
        gap = max(gap, _state_gap(Mh, M, transpose_state(M, Mh, t1.state(i)), t2.state(i)))
    return gap


def equivariance_error(M, Mh, q0: StatePoint, curve: Curve, iso, iso_frame, step=1e-3) -> float:
    """Rolling commutes with an isometry F^ of M^.

    ``iso`` maps coordinates of M^ to coordinates of M^, ``iso_frame(x^)`` is
    its differential at x^ in orthonormal frames.  F^ acts on states by
    (x, x^; A) -> (x, F^(x^); dF^ A).
    """
    def act(q):
        A = q.frame_A(M, Mh)
        return StatePoint(q.x, iso(q.x_hat), iso_frame(q.x_hat) @ A)

    t1 = integrate_rolling(M, Mh, q0, ControlPath(curve), step)
    t2 = integrate_rolling(M, Mh, act(q0.in_frames(M, Mh)), ControlPath(curve), step)
    return max(_state_gap(M, Mh, act(t1.state(i)), t2.state(i)) for i in range(len(t1.ts)))
