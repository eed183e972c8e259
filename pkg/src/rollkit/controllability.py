"""Lie-bracket rank of the rolling distribution, holonomy, and the rolling connection.

Tangent vectors of Q (equal dimensions) are handled in Q-coordinates:
(u, u^, w) where u, u^ are frame velocities and w holds the upper triangle of
the skew matrix A^T V (scaled by sqrt 2), V being the vertical part of dA/dt.
With that scaling the Euclidean norm of Q-coordinates is the Sasaki norm.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import List

import numpy as np
from scipy.linalg import logm, null_space
from scipy.stats import special_ortho_group

from .curvature import covariant_curvature_matrix, rol_frame
from .errors import DepthExceeded, DimMismatch, KZero
from .manifold_core import Curve, ManifoldModel, curvature_matrix, omega_matrix, transport_matrices
from .ode import rk4_pieces
from .state_space import StatePoint, q_dim, require_valid

# ---------------------------------------------------------------------------
# Q-coordinates and vector fields on the ambient space (x, x^, A)


def _skew_coords(S):
    n = S.shape[0]
    iu = np.triu_indices(n, 1)
    return math.sqrt(2.0) * S[iu]


def q_coords(A, u, uh, V):
    """Q-coordinates of (u, u^, vertical V) at A (frames, n = n^)."""
    S = A.T @ V
    return np.concatenate([u, uh, _skew_coords(0.5 * (S - S.T))])


class RollingFields:
    """The vector fields whose brackets generate Lie(D_R), in frame coordinates.

    A point of the ambient space is y = (x, x^, A) flattened; every field is
    returned either as an ambient velocity or in Q-coordinates.
    """

    def __init__(self, M: ManifoldModel, Mh: ManifoldModel):
        if M.dim != Mh.dim:
            raise DimMismatch("Lie-rank computations need n = n^")
        self.M, self.Mh = M, Mh
        self.n = M.dim
        self.E = np.eye(self.n)
        self.pairs = list(combinations(range(self.n), 2))

    # -- point helpers --------------------------------------------------
    def pack(self, q: StatePoint):
        return np.concatenate([q.x, q.x_hat, q.frame_A(self.M, self.Mh).ravel()])

    def unpack(self, y):
        n = self.n
        return y[:n], y[n:2 * n], y[2 * n:].reshape(n, n)

    def geometry(self, y):
        x, xh, A = self.unpack(y)
        M, Mh = self.M, self.Mh
        return {"x": x, "xh": xh, "A": A, "W": M.omega(x), "Wh": Mh.omega(xh),
                "Rf": M.frame_curvature(x), "Rfh": Mh.frame_curvature(xh)}

    def to_ambient(self, y, qv, geo=None):
        """Ambient velocity of the Q-coordinate vector qv at y."""
        n = self.n
        geo = geo or self.geometry(y)
        A = geo["A"]
        u, uh, w = qv[:n], qv[n:2 * n], qv[2 * n:]
        S = np.zeros((n, n))
        S[np.triu_indices(n, 1)] = w / math.sqrt(2.0)
        S = S - S.T
        V = A @ S
        dA = V + A @ omega_matrix(geo["W"], u) - omega_matrix(geo["Wh"], uh) @ A
        return np.concatenate([self.M.frame(geo["x"]) @ u, self.Mh.frame(geo["xh"]) @ uh, dA.ravel()])

    def from_ambient(self, y, dy, geo=None):
        n = self.n
        geo = geo or self.geometry(y)
        A = geo["A"]
        u = self.M.coframe(geo["x"]) @ dy[:n]
        uh = self.Mh.coframe(geo["xh"]) @ dy[n:2 * n]
        dA = dy[2 * n:].reshape(n, n)
        V = dA - (A @ omega_matrix(geo["W"], u) - omega_matrix(geo["Wh"], uh) @ A)
        return q_coords(A, u, uh, V)

    # -- analytic fields in Q-coordinates --------------------------------
    def rol(self, geo, a, b):
        return rol_frame(geo["A"], geo["Rf"], geo["Rfh"], self.E[a], self.E[b])

    def lift(self, geo, c):
        """Rolling lift of E_c."""
        A = geo["A"]
        return q_coords(A, self.E[c], A @ self.E[c], np.zeros_like(A))

    def level2(self, geo, a, b):
        """[L_R(E_a), L_R(E_b)] = L_R([E_a, E_b]) + nu(Rol(E_a, E_b)(A))."""
        A, W = geo["A"], geo["W"]
        br = W[a, b] - W[b, a]
        return q_coords(A, br, A @ br, self.rol(geo, a, b))

    def vertical_rol(self, geo, a, b):
        """nu(Rol(E_a, E_b)(.)) as a field."""
        A = geo["A"]
        z = np.zeros(self.n)
        return q_coords(A, z, z, self.rol(geo, a, b))

    def mixed(self, geo, c, a, b, DRf=None, DRfh=None):
        """[L_R(E_c), nu(Rol(E_a, E_b)(.))]."""
        n = self.n
        A, W, Rf, Rfh = geo["A"], geo["W"], geo["Rf"], geo["Rfh"]
        if DRf is None:
            DRf = self.M.frame_curvature_derivative(geo["x"])
        if DRfh is None:
            DRfh = self.Mh.frame_curvature_derivative(geo["xh"])
        Ea, Eb, Ec = self.E[a], self.E[b], self.E[c]
        R_ab = rol_frame(A, Rf, Rfh, Ea, Eb)
        nabla1 = (A @ covariant_curvature_matrix(DRf, Ec, Ea, Eb)
                  - covariant_curvature_matrix(DRfh, A @ Ec, A @ Ea, A @ Eb) @ A)
        dEa = W[c, a]  # nabla_{E_c} E_a
        dEb = W[c, b]
        V = nabla1 + rol_frame(A, Rf, Rfh, dEa, Eb) + rol_frame(A, Rf, Rfh, Ea, dEb)
        return q_coords(A, np.zeros(n), -R_ab @ Ec, V)

    def vert_vert(self, geo, p1, p2):
        """[nu(Rol(X, Y)(.)), nu(Rol(Z, W)(.))] for frame pairs p1 = (X, Y), p2 = (Z, W)."""
        A, Rf, Rfh = geo["A"], geo["Rf"], geo["Rfh"]
        X, Y = self.E[p1[0]], self.E[p1[1]]
        Z, Wv = self.E[p2[0]], self.E[p2[1]]
        RXY, RZW = curvature_matrix(Rf, X, Y), curvature_matrix(Rf, Z, Wv)
        Rh = lambda P, Q: curvature_matrix(Rfh, P, Q)
        rol1 = rol_frame(A, Rf, Rfh, X, Y)
        rol2 = rol_frame(A, Rf, Rfh, Z, Wv)
        V = (A @ (RXY @ RZW - RZW @ RXY)
             - (Rh(A @ X, A @ Y) @ Rh(A @ Z, A @ Wv) - Rh(A @ Z, A @ Wv) @ Rh(A @ X, A @ Y)) @ A
             - Rh(rol1 @ Z, A @ Wv) @ A - Rh(A @ Z, rol1 @ Wv) @ A
             + Rh(A @ X, rol2 @ Y) @ A + Rh(rol2 @ X, A @ Y) @ A)
        z = np.zeros(self.n)
        return q_coords(A, z, z, V)

    # -- ambient versions for flows --------------------------------------
    def lift_combination(self, coef):
        """Ambient field of L_R(sum_c coef_c E_c)."""
        coef = np.asarray(coef, float)

        def f(y):
            geo = self.geometry(y)
            A = geo["A"]
            return self.to_ambient(y, q_coords(A, coef, A @ coef, np.zeros_like(A)), geo)
        return f

    def mixed_combination(self, coef):
        """Ambient field of sum over (c, a<b) of coef * [L_R(E_c), nu(Rol(E_a, E_b))]."""
        coef = np.asarray(coef, float)
        idx = [(c, a, b) for c in range(self.n) for a, b in self.pairs]

        def f(y):
            geo = self.geometry(y)
            DRf = self.M.frame_curvature_derivative(geo["x"])
            DRfh = self.Mh.frame_curvature_derivative(geo["xh"])
            qv = sum(w * self.mixed(geo, c, a, b, DRf, DRfh) for w, (c, a, b) in zip(coef, idx))
            return self.to_ambient(y, qv, geo)
        return f

    def ambient_field(self, kind, *idx):
        """Ambient vector field y -> dy for one of the analytic generators."""
        method = {"lift": self.lift, "level2": self.level2, "vrol": self.vertical_rol,
                  "mixed": self.mixed}[kind]

        def f(y):
            geo = self.geometry(y)
            return self.to_ambient(y, method(geo, *idx), geo)
        return f


# ---------------------------------------------------------------------------
# flow commutators


def flow(field_fn, y, t, substeps=8):
    """Time-t flow of an autonomous ambient field (RK4, fixed substeps)."""
    h = t / substeps
    for _ in range(substeps):
        k1 = field_fn(y)
        k2 = field_fn(y + 0.5 * h * k1)
        k3 = field_fn(y + 0.5 * h * k2)
        k4 = field_fn(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _commutator_path(X, Y, y, s, substeps):
    z = flow(X, y, s, substeps)
    z = flow(Y, z, s, substeps)
    z = flow(X, z, -s, substeps)
    return flow(Y, z, -s, substeps)


def flow_bracket(X, Y, y, s, substeps=8):
    """Symmetric flow-commutator estimate of [X, Y](y) with step s.

    c(s) = Phi^Y_{-s} Phi^X_{-s} Phi^Y_s Phi^X_s (y) = y + s^2 [X, Y] + O(s^3);
    averaging c(s) and c(-s) cancels the odd orders.
    """
    cp = _commutator_path(X, Y, y, s, substeps)
    cm = _commutator_path(X, Y, y, -s, substeps)
    return (0.5 * (cp + cm) - y) / (s * s)


def jacobian_bracket(X, Y, y, h=1e-5):
    """[X, Y](y) = DY X - DX Y with central-difference directional derivatives."""
    xv, yv = X(y), Y(y)
    dY = (Y(y + h * xv) - Y(y - h * xv)) / (2 * h)
    dX = (X(y + h * yv) - X(y - h * yv)) / (2 * h)
    return dY - dX


def flow_bracket_richardson(X, Y, y, s=1e-2, substeps=8):
    """Two-point Richardson extrapolation of :func:`flow_bracket` (error O(s^4))."""
    b1 = flow_bracket(X, Y, y, s, substeps)
    b2 = flow_bracket(X, Y, y, 0.5 * s, substeps)
    return (4.0 * b2 - b1) / 3.0


def level2_convergence(M, Mh, q: StatePoint, a=0, b=1, steps=(0.08, 0.04, 0.02, 0.01), substeps=16):
    """Errors of the flow-commutator estimate of [L_R(E_a), L_R(E_b)] against the analytic value.

    Returns (steps, errors, observed order from a log-log fit).
    """
    F = RollingFields(M, Mh)
    y = F.pack(q)
    geo = F.geometry(y)
    exact = F.level2(geo, a, b)
    X = F.ambient_field("lift", a)
    Y = F.ambient_field("lift", b)
    errs = []
    for s in steps:
        est = F.from_ambient(y, flow_bracket(X, Y, y, s, substeps), geo)
        errs.append(float(np.linalg.norm(est - exact)))
    order = float(np.polyfit(np.log(steps), np.log(errs), 1)[0])
    return np.array(steps), np.array(errs), order


# ---------------------------------------------------------------------------
# rank


@dataclass
class RankReport:
    q: StatePoint
    level_ranks: List[int]
    final_rank: int
    basis: np.ndarray  # rows: orthonormal Q-coordinate vectors spanning the computed space
    singular_values: np.ndarray
    dim_Q: int
    gap_ratio: float
    depth: int
    attained_depth: int = 0
    seconds: float = 0.0
    level_vectors: List[int] = field(default_factory=list)

    def to_dict(self):
        return {"level_ranks": self.level_ranks, "final_rank": self.final_rank,
                "attained_depth": self.attained_depth,
                "singular_values": self.singular_values.tolist(), "dim_Q": self.dim_Q,
                "gap_ratio": self.gap_ratio, "depth": self.depth}


def numerical_rank(vectors, tol):
    """(rank, singular values, gap ratio, orthonormal row basis)."""
    Mx = np.atleast_2d(np.asarray(vectors, float))
    _, s, Vt = np.linalg.svd(Mx, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return 0, s, math.inf, Vt[:0]
    r = int(np.sum(s > tol * s[0]))
    if r < len(s):
        gap = s[r - 1] / s[r] if s[r] > 0 else math.inf
    else:
        gap = math.inf
    return r, s, float(gap), Vt[:r]


def lie_rank(M, Mh, q: StatePoint, max_depth=5, tol=1e-6, flow_step=1e-2, substeps=8,
             state_tol=1e-8, seed=0) -> RankReport:
    """Rank of Lie(D_R) at q, by bracket depth.

    Depth 1 holds the rolling lifts, depth 2 their brackets, depth 3 the
    mixed brackets [L_R(E_c), nu(Rol(E_a, E_b))] and the vertical-vertical
    brackets [nu(Rol), nu(Rol)], all in closed form.  Depth 4 adds
    flow-commutator estimates of [L_R(E_d), [L_R(E_c), nu(Rol(E_a, E_b))]]
    and depth 5 one more lift on top of those.  ``attained_depth`` is the
    first depth at which the final rank was reached.  The search stops
    once the rank reaches dim Q or repeats between two successive depths.
    """
    t_start = time.perf_counter()
    require_valid(M, Mh, q, state_tol)
    F = RollingFields(M, Mh)
    n = F.n
    dQ = q_dim(n, n)
    y = F.pack(q)
    geo = F.geometry(y)
    vecs = []
    ranks = []
    counts = []
    report = None

    def snapshot(depth):
        r, s, gap, basis = numerical_rank(vecs, tol)
        r = min(r, dQ)
        ranks.append(r)
        counts.append(len(vecs))
        attained = 1 + ranks.index(r)
        return RankReport(q, list(ranks), r, basis, s, dQ, gap, depth, attained,
                          time.perf_counter() - t_start, list(counts))

    for depth in range(1, max_depth + 1):
        if depth == 1:
            vecs += [F.lift(geo, c) for c in range(n)]
        elif depth == 2:
            vecs += [F.level2(geo, a, b) for a, b in F.pairs]
        elif depth == 3:
            DRf = M.frame_curvature_derivative(geo["x"])
            DRfh = Mh.frame_curvature_derivative(geo["xh"])
            vecs += [F.mixed(geo, c, a, b, DRf, DRfh) for c in range(n) for a, b in F.pairs]
            vecs += [F.vert_vert(geo, p1, p2) for p1, p2 in combinations(F.pairs, 2)]
        elif depth == 4:
            for d in range(n):
                X = F.ambient_field("lift", d)
                for c in range(n):
                    for a, b in F.pairs:
                        Y = F.ambient_field("mixed", c, a, b)
                        amb = flow_bracket_richardson(X, Y, y, flow_step, substeps)
                        vecs.append(F.from_ambient(y, amb, geo))
        elif depth == 5:
            # Brackets are multilinear, so random combinations of the generators
            # span the same space as the full enumeration.  The inner depth-4
            # field is a Jacobian bracket of closed forms.
            rng = np.random.default_rng(seed)
            nm = n * len(F.pairs)
            for _ in range(dQ + 2):
                X = F.lift_combination(rng.normal(size=n))
                Fd = F.lift_combination(rng.normal(size=n))
                G = F.mixed_combination(rng.normal(size=nm))
                Hf = lambda z, Fd=Fd, G=G: jacobian_bracket(Fd, G, z)
                amb = flow_bracket_richardson(X, Hf, y, flow_step, substeps)
                vecs.append(F.from_ambient(y, amb, geo))
        else:
            break
        report = snapshot(depth)
        if report.final_rank >= dQ or (len(ranks) >= 2 and ranks[-1] == ranks[-2]):
            return report
    raise DepthExceeded(f"rank not stabilized by depth {max_depth} (ranks {ranks})", report)


# ---------------------------------------------------------------------------
# holonomy


@dataclass
class HolonomySample:
    base: np.ndarray
    elements: List[np.ndarray]
    algebra_span: List[np.ndarray]  # orthonormal skew matrices (Frobenius / 2)

    @property
    def dim(self):
        return len(self.algebra_span)

    def to_dict(self):
        return {"base": self.base.tolist(), "dim": self.dim,
                "algebra_span": [S.tolist() for S in self.algebra_span]}


def _skew_span(mats, tol):
    if not mats:
        return []
    n = mats[0].shape[0]
    iu = np.triu_indices(n, 1)
    rows = np.array([S[iu] for S in mats])
    scale = max(1.0, np.max(np.abs(rows)))
    _, s, Vt = np.linalg.svd(rows / scale, full_matrices=False)
    r = int(np.sum(s > tol))
    out = []
    for v in Vt[:r]:
        S = np.zeros((n, n))
        S[iu] = v
        out.append(S - S.T)
    return out


def _segment(x0, x1):
    d = x1 - x0
    return Curve(lambda t: x0 + t * d, lambda t: d, 1.0)


def _loop_curve(x0, P, Q, scale):
    """Closed chart loop t -> x0 + scale (P sin t + Q (1 - cos t)) on [0, 2 pi]."""
    def pos(t):
        return x0 + scale * (P * math.sin(t) + Q * (1 - math.cos(t)))

    def vel(t):
        return scale * (P * math.cos(t) + Q * math.sin(t))
    return Curve(pos, vel, 2 * math.pi)


def _segment_ok(M, x0, x1, checks=16):
    return all(M.in_domain(x0 + s * (x1 - x0)) for s in np.linspace(0, 1, checks))


def holonomy_algebra(M, x0, n_loops=6, loop_scale=0.3, n_points=40, seed=0, step=2e-3, tol=1e-8):
    """Holonomy algebra at x0 from transported curvature operators, closed under brackets.

    Curvature endomorphisms R(E_a, E_b) at sampled points y are pulled back to
    x0 along chart segments; the span is then closed under the commutator
    (at most 10 rounds).  ``elements`` holds transports around small loops.
    """
    x0 = M.check(x0)
    n = M.dim
    rng = np.random.default_rng(seed)
    gens = []
    pts = [x0]
    tries = 0
    while len(pts) < n_points and tries < 50 * n_points:
        tries += 1
        y = x0 + loop_scale * rng.uniform(-1, 1, size=n)
        if _segment_ok(M, x0, y):
            pts.append(y)
    E = np.eye(n)
    for y in pts:
        Rf = M.frame_curvature(y)
        P = np.eye(n) if y is x0 else transport_matrices(M, _segment(x0, y), step)
        Pinv = np.linalg.inv(P)
        for a, b in combinations(range(n), 2):
            gens.append(Pinv @ curvature_matrix(Rf, E[a], E[b]) @ P)
    span = _skew_span(gens, tol)
    for _ in range(10):
        new = span + [S @ T - T @ S for S, T in combinations(span, 2)]
        grown = _skew_span(new, tol)
        if len(grown) == len(span):
            break
        span = grown
    elements = []
    for _ in range(n_loops):
        P_, Q_ = rng.normal(size=n), rng.normal(size=n)
        loop = _loop_curve(x0, P_, Q_, 0.1 * loop_scale / max(np.linalg.norm(P_), np.linalg.norm(Q_)))
        elements.append(transport_matrices(M, loop, step))
    return HolonomySample(np.asarray(x0), elements, span)


@dataclass
class NSReport:
    controllable: bool
    worst_deficiency: int
    dims: List[int]
    hol_dim: int
    hol_hat_dim: int

    def to_dict(self):
        return {"controllable": self.controllable, "worst_deficiency": self.worst_deficiency,
                "dims": self.dims, "hol_dim": self.hol_dim, "hol_hat_dim": self.hol_hat_dim}


def _random_rotations(n, count, seed):
    if n == 1:
        return [np.eye(1)] * count
    if n == 2:
        rng = np.random.default_rng(seed)
        out = []
        for th in rng.uniform(-math.pi, math.pi, size=count):
            c, s = math.cos(th), math.sin(th)
            out.append(np.array([[c, -s], [s, c]]))
        return out
    return list(special_ortho_group.rvs(n, size=count, random_state=seed).reshape(count, n, n))


def ns_controllable(M, Mh, n_A_samples=20, x0=None, x0_hat=None, seed=0, **hol_kw) -> NSReport:
    """Sampled test of h + A^{-1} h^ A = so(n) over A in SO(n).

    ``worst_deficiency`` is the largest codimension met over the samples.
    """
    if M.dim != Mh.dim:
        raise DimMismatch("the no-spin criterion needs n = n^")
    n = M.dim
    x0 = M.sample_points(1, seed=seed)[0] if x0 is None else x0
    x0_hat = Mh.sample_points(1, seed=seed + 1)[0] if x0_hat is None else x0_hat
    h = holonomy_algebra(M, x0, seed=seed, **hol_kw).algebra_span
    hh = holonomy_algebra(Mh, x0_hat, seed=seed + 1, **hol_kw).algebra_span
    full = n * (n - 1) // 2
    dims = []
    for A in _random_rotations(n, n_A_samples, seed):
        mats = list(h) + [A.T @ S @ A for S in hh]
        dims.append(len(_skew_span(mats, 1e-8)))
    worst = full - min(dims) if dims else full
    return NSReport(worst == 0, int(worst), dims, len(h), len(hh))


# ---------------------------------------------------------------------------
# rolling connection on TM + R


@dataclass
class RolConState:
    X: np.ndarray  # frame components
    r: float

    def hk_norm2(self, k):
        return float(self.X @ self.X + k * self.r * self.r)


@dataclass
class RolConPath:
    ts: np.ndarray
    Xs: np.ndarray
    rs: np.ndarray
    k: float

    @property
    def final(self):
        return RolConState(self.Xs[-1], float(self.rs[-1]))

    def hk_drift(self):
        h = np.einsum("ij,ij->i", self.Xs, self.Xs) + self.k * self.rs ** 2
        return float(np.max(np.abs(h - h[0])))


def _check_k(k):
    if k == 0:
        raise KZero("the rolling connection needs k != 0")


def rolcon_matrix(M, k, x, u):
    """Connection matrix of the rolling connection: (w, r)' = -C(u) (w, r)."""
    _check_k(k)
    n = M.dim
    C = np.zeros((n + 1, n + 1))
    C[:n, :n] = omega_matrix(M.omega(x), u)
    C[:n, n] = u
    C[n, :n] = -u / k
    return C


def rolcon_transport(M, k, curve: Curve, state0: RolConState, step=1e-3, keep=True) -> RolConPath:
    """Parallel transport for the rolling connection along a chart curve.

    w' = -Om(u) w - r u and r' = g(u, w) / k, with u the frame velocity.
    """
    _check_k(k)
    n = M.dim

    def make_rhs(piece):
        def rhs(t, y):
            x = piece.position(t)
            u = M.coframe(x) @ piece.velocity(t)
            return -rolcon_matrix(M, k, x, u) @ y
        return rhs

    M.check(curve.position(0.0), t=0.0)
    last = [0.0]

    def watch(t, y):
        M.check(curve.position(t), t=last[0])
        last[0] = t

    y0 = np.concatenate([np.asarray(state0.X, float), [float(state0.r)]])
    ts, ys, _ = rk4_pieces(curve.pieces(), make_rhs, y0, step, watch)
    return RolConPath(ts, ys[:, :n], ys[:, n], float(k))


def rolcon_transport_matrix(M, k, curve: Curve, step=1e-3):
    _check_k(k)
    n = M.dim

    def make_rhs(piece):
        def rhs(t, P):
            x = piece.position(t)
            u = M.coframe(x) @ piece.velocity(t)
            return -rolcon_matrix(M, k, x, u) @ P
        return rhs

    _, Ps, _ = rk4_pieces(curve.pieces(), make_rhs, np.eye(n + 1), step)
    return Ps[-1]


def rolcon_curvature(M, k, x, X, Y):
    """Curvature of the rolling connection at x on (Z, r) in frame components.

    The TM block is R(X, Y) - (1/k)(g(Y, .) X - g(X, .) Y); the scalar row
    and column vanish.
    """
    _check_k(k)
    n = M.dim
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = curvature_matrix(M.frame_curvature(x), X, Y) - (np.outer(X, Y) - np.outer(Y, X)) / k
    return out


def small_loop_holonomy(M, k, x, area, step=1e-3):
    """Transport of the rolling connection around a small loop at x, with its enclosed area.

    The loop is the chart ellipse x + rho (cos t E_1 + sin t E_2) traversed
    once counterclockwise; its holonomy is carried back to the centre x along
    the radius through its starting point.  With transport w' = -C w the
    holonomy is I - area F + O(area^2), so the curvature estimate returned is
    -log(P)/area.  Returns (holonomy matrix, metric area, estimate).
    """
    from scipy.integrate import quad

    _check_k(k)
    E = M.frame(x)
    e1, e2 = E[:, 0], E[:, 1]
    rho = math.sqrt(area / math.pi)

    def pos(t):
        return x + rho * (math.cos(t) * e1 + math.sin(t) * e2)

    def vel(t):
        return rho * (-math.sin(t) * e1 + math.cos(t) * e2)

    loop = Curve(pos, vel, 2 * math.pi)
    # metric area of the planar chart region spanned by e1, e2
    base = np.column_stack([e1, e2])

    def density(s, t):
        p = x + base @ np.array([s * math.cos(t), s * math.sin(t)])
        g = base.T @ M.metric(p) @ base
        return math.sqrt(np.linalg.det(g)) * s

    inner = lambda t: quad(lambda s: density(s, t), 0.0, rho, epsabs=1e-14, epsrel=1e-12)[0]
    A_metric = quad(inner, 0.0, 2 * math.pi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    P = rolcon_transport_matrix(M, k, loop, step)
    # conjugate back to the centre along the radius
    T = rolcon_transport_matrix(M, k, _segment(x, pos(0.0)), step * rho)
    P = np.linalg.solve(T, P @ T)
    L = -np.real(logm(P)) / A_metric
    return P, A_metric, L


def _invariant_subspaces(Ts, H, tol, rng):
    """Eigenspaces of a random element of the H-self-adjoint commutant of Ts."""
    m = Ts[0].shape[0]
    I = np.eye(m)
    rows = [np.kron(T, I) - np.kron(I, T.T) for T in Ts]  # C T - T C in row-major vec
    # H C symmetric (H diagonal): H_ii C_ij = H_jj C_ji
    sym = []
    for i in range(m):
        for j in range(i + 1, m):
            r = np.zeros((m, m))
            r[i, j] = H[i, i]
            r[j, i] = -H[j, j]
            sym.append(r.ravel())
    K = np.vstack(rows + [np.array(sym)])
    N = null_space(K, rcond=tol)
    C = (N @ rng.normal(size=N.shape[1])).reshape(m, m)
    w, V = np.linalg.eig(C)
    w = np.real_if_close(w)
    order = np.argsort(np.real(w))
    groups = []
    for i in order:
        if groups and abs(np.real(w[i]) - np.real(w[groups[-1][0]])) < 1e-6 * max(1.0, np.max(np.abs(w))):
            groups[-1].append(i)
        else:
            groups.append([i])
    subs = []
    for g in groups:
        B = np.real(V[:, g])
        Q, _ = np.linalg.qr(B)
        subs.append(Q[:, :len(g)])
    return subs


@dataclass
class ReducibilityReport:
    subspaces: List[np.ndarray]  # proper invariant subspaces, columns orthonormal
    dims: List[int]
    loops: int
    invariance_residual: float

    @property
    def irreducible(self):
        return not self.subspaces

    def to_dict(self):
        return {"dims": self.dims, "irreducible": self.irreducible, "loops": self.loops,
                "invariance_residual": self.invariance_residual}


def rolcon_reducibility(M, k, x0, n_loops=8, loop_scale=0.4, seed=0, step=2e-3, restarts=3,
                        angle_tol=1e-5) -> ReducibilityReport:
    """Scan loop holonomies of the rolling connection for jointly invariant subspaces.

    Loops are random chart ellipses through x0.  The subspaces come from a
    random self-adjoint (w.r.t. h_k) element of the commutant of the sampled
    transports; several restarts must agree.  The whole space is dropped.
    """
    _check_k(k)
    x0 = M.check(x0)
    n = M.dim
    rng = np.random.default_rng(seed)
    Ts = []
    while len(Ts) < n_loops:
        P_, Q_ = rng.normal(size=n), rng.normal(size=n)
        sc = loop_scale / max(np.linalg.norm(P_), np.linalg.norm(Q_))
        loop = _loop_curve(x0, P_, Q_, sc)
        if not all(M.in_domain(loop.position(t)) for t in np.linspace(0, loop.duration, 64)):
            continue
        Ts.append(rolcon_transport_matrix(M, k, loop, step))
    H = np.diag([1.0] * n + [float(k)])
    best = None
    for _ in range(restarts):
        # a generic commutant element gives the finest splitting
        subs = _invariant_subspaces(Ts, H, 1e-7, rng)
        if best is None or len(subs) > len(best):
            best = subs
    proper = [S for S in best if S.shape[1] < n + 1]
    res = 0.0
    for S in proper:
        Pi = S @ S.T
        for T in Ts:
            res = max(res, float(np.linalg.norm((np.eye(n + 1) - Pi) @ T @ S)))
    if res >= angle_tol:
        proper = []
    return ReducibilityReport(proper, [S.shape[1] for S in proper], len(Ts), res)
