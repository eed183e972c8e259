"""The rolling state space Q(M, M^) and its tangent vectors.

A state q = (x, x^; A) stores A as an n^ x n matrix.  By default A is taken
w.r.t. the orthonormal frames of both models; a chart flag on either side
means chart coordinate bases on that side.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Tuple

import numpy as np
from scipy.linalg import null_space, polar

from .errors import BaseMismatch, InvalidState
from .manifold_core import ManifoldModel, TangentVector, omega_matrix

BASES = ("frame", "chart")


@dataclass(frozen=True, eq=False)
class StatePoint:
    x: np.ndarray
    x_hat: np.ndarray
    A: np.ndarray
    basis: Tuple[str, str] = ("frame", "frame")

    def __post_init__(self):
        basis = self.basis
        if isinstance(basis, str):
            basis = (basis, basis)
        if any(b not in BASES for b in basis):
            raise ValueError("basis must be 'frame' or 'chart' on each side")
        object.__setattr__(self, "basis", tuple(basis))
        object.__setattr__(self, "x", np.asarray(self.x, float).copy())
        object.__setattr__(self, "x_hat", np.asarray(self.x_hat, float).copy())
        A = np.atleast_2d(np.asarray(self.A, float)).copy()
        if A.shape != (len(self.x_hat), len(self.x)):
            raise InvalidState(f"A has shape {A.shape}, expected {(len(self.x_hat), len(self.x))}")
        object.__setattr__(self, "A", A)

    def frame_A(self, M, Mh):
        """A w.r.t. the orthonormal frames on both sides."""
        A = self.A
        if self.basis[0] == "chart":
            A = A @ M.frame(self.x)
        if self.basis[1] == "chart":
            A = Mh.coframe(self.x_hat) @ A
        return A

    def in_frames(self, M, Mh):
        return StatePoint(self.x, self.x_hat, self.frame_A(M, Mh))

    def in_charts(self, M, Mh):
        A = Mh.frame(self.x_hat) @ self.frame_A(M, Mh) @ M.coframe(self.x)
        return StatePoint(self.x, self.x_hat, A, ("chart", "chart"))

    def to_dict(self):
        return {"x": self.x.tolist(), "x_hat": self.x_hat.tolist(),
                "A_row_major": self.A.ravel().tolist(), "basis": list(self.basis)}

    @classmethod
    def from_dict(cls, d):
        x = np.asarray(d["x"], float)
        xh = np.asarray(d["x_hat"], float)
        A = np.asarray(d["A_row_major"], float).reshape(len(xh), len(x))
        return cls(x, xh, A, tuple(d.get("basis", ("frame", "frame"))))


@dataclass(frozen=True, eq=False)
class QTangent:
    """Tangent vector of Q: base velocities and the ambient derivative B of A.

    ``B`` is dA/dt in the same bases as the state's A.
    """

    v: TangentVector
    v_hat: TangentVector
    B: np.ndarray


@dataclass(frozen=True)
class Validity:
    isometry_residual: float
    orientation_ok: bool
    ok: bool


def _transpose_matrix(A, g, gh):
    """A^T-bar w.r.t. metrics g (domain) and gh (codomain)."""
    return np.linalg.solve(g, A.T @ gh)


def isometry_residual(A, g=None, gh=None):
    nh, n = A.shape
    g = np.eye(n) if g is None else g
    gh = np.eye(nh) if gh is None else gh
    At = _transpose_matrix(A, g, gh)
    if n <= nh:
        return float(np.linalg.norm(At @ A - np.eye(n)))
    return float(np.linalg.norm(A @ At - np.eye(nh)))


def _metrics(M, Mh, q):
    g = np.eye(M.dim) if q.basis[0] == "frame" else M.metric(q.x)
    gh = np.eye(Mh.dim) if q.basis[1] == "frame" else Mh.metric(q.x_hat)
    return g, gh


def validate_state(M: ManifoldModel, Mh: ManifoldModel, q: StatePoint, tol=1e-8) -> Validity:
    """Isometry defect of A and, when n = n^, its orientation."""
    M.check(q.x)
    Mh.check(q.x_hat)
    g, gh = _metrics(M, Mh, q)
    res = isometry_residual(q.A, g, gh)
    orient = True
    if M.dim == Mh.dim:
        orient = bool(np.linalg.det(q.frame_A(M, Mh)) > 0)
    return Validity(res, orient, res < tol and orient)


def require_valid(M, Mh, q, tol=1e-8):
    v = validate_state(M, Mh, q, tol)
    if not v.ok:
        raise InvalidState(f"state not in Q: residual {v.isometry_residual:.3e}, orientation ok {v.orientation_ok}")
    return v


def orthonormalize(A):
    """Nearest matrix with orthonormal columns (or rows) by polar decomposition."""
    nh, n = A.shape
    if n <= nh:
        U, _ = polar(A)
        return U
    U, _ = polar(A.T)
    return U.T


def skew_basis(n):
    out = []
    for i, j in combinations(range(n), 2):
        K = np.zeros((n, n))
        K[j, i] = 1.0
        K[i, j] = -1.0
        out.append(K)
    return out


def fiber_dim(n, nh):
    m = min(n, nh)
    return n * nh - m * (m + 1) // 2


def q_dim(n, nh):
    return n + nh + fiber_dim(n, nh)


def vertical_basis(M, Mh, q: StatePoint, tol=1e-8):
    """Basis of the fibre tangent space at q, in the bases of q.

    For n <= n^ the elements are A K and A_perp C with K skew and A_perp an
    orthonormal complement of the image of A; for n > n^ they are K A and
    C A_perp^T with A_perp spanning the kernel.
    """
    require_valid(M, Mh, q, tol)
    A = q.frame_A(M, Mh)
    nh, n = A.shape
    out = []
    if n <= nh:
        out += [A @ K for K in skew_basis(n)]
        if nh > n:
            perp = null_space(A.T)
            for a in range(nh - n):
                for j in range(n):
                    C = np.zeros((n,))
                    C[j] = 1.0
                    out.append(np.outer(perp[:, a], C))
    else:
        out += [K @ A for K in skew_basis(nh)]
        perp = null_space(A)
        for a in range(n - nh):
            for i in range(nh):
                e = np.zeros(nh)
                e[i] = 1.0
                out.append(np.outer(e, perp[:, a]))
    return [_from_frame_B(M, Mh, q, B) for B in out]


def _from_frame_B(M, Mh, q, B):
    if q.basis[0] == "chart":
        B = B @ M.coframe(q.x)
    if q.basis[1] == "chart":
        B = Mh.frame(q.x_hat) @ B
    return B


def _to_frame_B(M, Mh, q, B):
    if q.basis[0] == "chart":
        B = B @ M.frame(q.x)
    if q.basis[1] == "chart":
        B = Mh.coframe(q.x_hat) @ B
    return B


def connection_matrix(M, x, v, basis):
    """Omega(v) in the requested basis: ``Om[k, j]`` with parallel w' = -Om w."""
    if basis == "frame":
        return omega_matrix(M.omega(x), v)
    return np.einsum("m,kmj->kj", v, M.christoffel(x))


def horizontal_B(M, Mh, q: StatePoint, v, v_hat):
    """The no-spin part A Om(v) - Om^(v^) A, in the bases of q (components given in those bases)."""
    return (q.A @ connection_matrix(M, q.x, v, q.basis[0])
            - connection_matrix(Mh, q.x_hat, v_hat, q.basis[1]) @ q.A)


def _components(Mmodel, vec: TangentVector, basis):
    if basis == "frame":
        return vec.frame_components(Mmodel)
    return vec.chart_components(Mmodel)


def lifts(M, Mh, q: StatePoint, v: TangentVector, v_hat: TangentVector = None, tol=1e-8) -> QTangent:
    """No-spin lift of (v, v^), or the rolling lift v^ = A v when v^ is omitted."""
    require_valid(M, Mh, q, tol)
    if not np.allclose(v.base, q.x, atol=1e-12):
        raise BaseMismatch("v is not based at x")
    vc = _components(M, v, q.basis[0])
    if v_hat is None:
        vhc = q.A @ vc
        v_hat = TangentVector(q.x_hat, vhc, q.basis[1])
    else:
        if not np.allclose(v_hat.base, q.x_hat, atol=1e-12):
            raise BaseMismatch("v_hat is not based at x_hat")
        vhc = _components(Mh, v_hat, q.basis[1])
    return QTangent(v, v_hat, horizontal_B(M, Mh, q, vc, vhc))


def vertical_part(M, Mh, q: StatePoint, xi: QTangent):
    """Vertical part of xi in frame bases."""
    vc = _components(M, xi.v, q.basis[0])
    vhc = _components(Mh, xi.v_hat, q.basis[1])
    return _to_frame_B(M, Mh, q, xi.B - horizontal_B(M, Mh, q, vc, vhc))


def vertical_tangent(M, Mh, q: StatePoint, B) -> QTangent:
    """Pure fibre direction B (in the bases of q)."""
    return QTangent(TangentVector(q.x, np.zeros(M.dim), q.basis[0]),
                    TangentVector(q.x_hat, np.zeros(Mh.dim), q.basis[1]), np.asarray(B, float))


def transpose_state(M, Mh, q: StatePoint, tol=1e-8) -> StatePoint:
    """(x, x^; A) -> (x^, x; A^T-bar), a state of Q(M^, M)."""
    require_valid(M, Mh, q, tol)
    g, gh = _metrics(M, Mh, q)
    At = _transpose_matrix(q.A, g, gh)
    return StatePoint(q.x_hat, q.x, At, (q.basis[1], q.basis[0]))


def sasaki_inner(M, Mh, q: StatePoint, xi: QTangent, eta: QTangent) -> float:
    """Sasaki-type inner product: base metrics plus the trace form on vertical parts."""
    for t in (xi, eta):
        if not (np.allclose(t.v.base, q.x, atol=1e-12) and np.allclose(t.v_hat.base, q.x_hat, atol=1e-12)):
            raise BaseMismatch("tangent vectors are not based at q")
    a = xi.v.frame_components(M) @ eta.v.frame_components(M)
    b = xi.v_hat.frame_components(Mh) @ eta.v_hat.frame_components(Mh)
    U = vertical_part(M, Mh, q, xi)
    V = vertical_part(M, Mh, q, eta)
    return float(a + b + np.trace(U.T @ V))
