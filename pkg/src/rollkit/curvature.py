"""Rolling curvature Rol, its symmetric form on two-vectors, and nabla Rol."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BaseMismatch, DimMismatch, DimNot3
from .manifold_core import STAR_PAIRS, TangentVector, curvature_matrix, pair_basis
from .state_space import StatePoint, _from_frame_B, require_valid


def _frame_vec(M, q, X):
    if isinstance(X, TangentVector):
        if not np.allclose(X.base, q.x, atol=1e-12):
            raise BaseMismatch("tangent vector is not based at x")
        return X.frame_components(M)
    return np.asarray(X, float)


def covariant_curvature_matrix(DRf, Z, X, Y):
    """Matrix of (nabla_Z R)(X, Y) in frame components."""
    return np.einsum("mijkl,m,i,j->lk", DRf, Z, X, Y)


def rol_frame(A, Rf, Rfh, X, Y):
    """A R(X, Y) - R^(AX, AY) A with everything in frames."""
    return A @ curvature_matrix(Rf, X, Y) - curvature_matrix(Rfh, A @ X, A @ Y) @ A


def rol(M, Mh, q: StatePoint, X, Y, tol=1e-8, check=True):
    """Rol(X, Y)(A), returned in the bases of q.

    X and Y are TangentVectors at x or plain frame-component arrays.
    """
    if check:
        require_valid(M, Mh, q, tol)
    A = q.frame_A(M, Mh)
    out = rol_frame(A, M.frame_curvature(q.x), Mh.frame_curvature(q.x_hat),
                    _frame_vec(M, q, X), _frame_vec(M, q, Y))
    return _from_frame_B(M, Mh, q, out)


def rol_tilde_matrix(M, Mh, q: StatePoint, tol=1e-8):
    """Rol-tilde on two-vectors: R_op minus the pull-back of R^_op by A.

    The basis is E_i ^ E_j (i < j), reordered to (E2^E3, E3^E1, E1^E2) in 3D.
    """
    if M.dim != Mh.dim:
        raise DimMismatch("Rol-tilde needs n = n^")
    require_valid(M, Mh, q, tol)
    A = q.frame_A(M, Mh)
    Rf = M.frame_curvature(q.x)
    Rfh = Mh.frame_curvature(q.x_hat)
    n = M.dim
    pairs = list(STAR_PAIRS) if n == 3 else pair_basis(n)
    E = np.eye(n)
    out = np.empty((len(pairs), len(pairs)))
    for c, (a, b) in enumerate(pairs):
        S = A.T @ rol_frame(A, Rf, Rfh, E[a], E[b])
        for r, (i, j) in enumerate(pairs):
            out[r, c] = -S[i, j]
    return out


@dataclass
class RollingCurvatureOperator:
    q: StatePoint
    matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray  # columns, orthonormal
    rank_class: int
    tol: float

    @property
    def kernel_basis(self):
        keep = np.abs(self.eigvals) <= self.tol
        return self.eigvecs[:, keep]

    def kernel_factor(self):
        """Orthonormal X, Y with X ^ Y spanning the kernel (rank 2, 3D only).

        In 3D a two-vector with star-components xi equals X ^ Y for any
        oriented orthonormal pair completing xi / |xi| to a positive basis.
        """
        if self.matrix.shape != (3, 3) or self.rank_class != 2:
            raise ValueError("kernel factorization needs a rank-2 operator in 3D")
        xi = self.kernel_basis[:, 0]
        z = xi / np.linalg.norm(xi)
        t = np.eye(3)[np.argmin(np.abs(z))]
        X = t - (t @ z) * z
        X /= np.linalg.norm(X)
        Y = np.cross(z, X)
        return X, Y

    def good_basis_data(self):
        """(K1, K2, alpha) in the eigenbasis of a rank-2 operator.

        In an eigenbasis alpha vanishes and K1, K2 are minus the nonzero
        eigenvalues, largest |lambda| first.
        """
        nz = np.argsort(-np.abs(self.eigvals))[:2]
        lam = self.eigvals[nz]
        return -lam[0], -lam[1], 0.0

    def to_dict(self):
        return {"eigvals": self.eigvals.tolist(), "rank_class": self.rank_class,
                "kernel_basis": self.kernel_basis.T.tolist()}


def rol_tilde_spectrum(M, Mh, q: StatePoint, tol=None, state_tol=1e-8) -> RollingCurvatureOperator:
    """Spectrum and rank class of Rol-tilde for n = n^ in {2, 3}."""
    if M.dim != Mh.dim or M.dim not in (2, 3):
        raise DimNot3("Rol-tilde spectrum is provided for n = n^ = 3 (and the 2D scalar case)")
    S = rol_tilde_matrix(M, Mh, q, state_tol)
    Ssym = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(Ssym)
    if tol is None:
        tol = 1e-7 * max(1.0, float(np.max(np.abs(w))))
    rank = int(np.sum(np.abs(w) > tol))
    return RollingCurvatureOperator(q, S, w, V, rank, tol)


def nabla_rol(M, Mh, q: StatePoint, X, Y, Z, tol=1e-8, check=True):
    """A (nabla_Z R)(X, Y) - (nabla^_{AZ} R^)(AX, AY) A, in the bases of q."""
    if check:
        require_valid(M, Mh, q, tol)
    A = q.frame_A(M, Mh)
    X, Y, Z = (_frame_vec(M, q, V) for V in (X, Y, Z))
    D = M.frame_curvature_derivative(q.x)
    Dh = Mh.frame_curvature_derivative(q.x_hat)
    out = (A @ covariant_curvature_matrix(D, Z, X, Y)
           - covariant_curvature_matrix(Dh, A @ Z, A @ X, A @ Y) @ A)
    return _from_frame_B(M, Mh, q, out)
