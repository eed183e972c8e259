"""Structure detection for 3-manifolds and orbit-dimension prediction.

Everything here runs through the connection table of an orthonormal frame
(E1, E2, E3), ``Gamma^j_(i,k) = g(nabla_{E_j} E_i, E_k) = W[j-1, i-1, k-1]``.
A frame has the *special* form when

    Gamma^2_(2,3) = Gamma^2_(1,2) = 0,
    Gamma^3_(2,3) = -Gamma^1_(1,2),   Gamma^3_(1,2) = Gamma^1_(2,3),

and Gamma^1_(2,3), Gamma^1_(1,2) do not vary along E1 and E3.  A constant
nonzero Gamma^1_(2,3) = beta with Gamma^1_(1,2) = 0 is class M_beta; a
vanishing Gamma^1_(2,3) is a local warped product with f'/f = -Gamma^1_(1,2)
and d/dr = E2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import DimNot3, FrameUnavailable, NotMBeta, Unclassified
from .manifold_core import curvature_operator, frame_omega
from .state_space import StatePoint, require_valid
from .zoo import WarpedModel

H_DERIV = 1e-4
DEFAULT_SAMPLES = 50
ALIGN_TOL = 1e-6


def _region_points(M, region, seed):
    if region is None:
        return M.sample_points(DEFAULT_SAMPLES, seed=seed)
    if isinstance(region, (int, np.integer)):
        return M.sample_points(int(region), seed=seed)
    pts = np.atleast_2d(np.asarray(region, float))
    for p in pts:
        M.check(p)
    return pts


class CurvatureEigenframe:
    """Frame field built from the eigenvectors of the curvature operator.

    E2 is the eigenvector of the most isolated eigenvalue (read as a vector
    through the Hodge star), signed to agree with its value at a reference
    point.  E1 is the projection of a fixed frame direction onto E2-perp and
    E3 = E1 x E2, so the field is smooth wherever the eigenvalue stays simple.
    """

    def __init__(self, M, x_ref):
        self.M = M
        xi = self._simple_vector(x_ref)
        lead = np.flatnonzero(np.abs(xi) > 1e-8)[0]
        if xi[lead] < 0:
            xi = -xi
        self.ref = xi
        self.t = np.eye(3)[int(np.argmin(np.abs(xi)))]

    def _simple_vector(self, x):
        w, V = np.linalg.eigh(curvature_operator(self.M.frame_curvature(x)))
        gaps = [min(abs(w[i] - w[j]) for j in range(3) if j != i) for i in range(3)]
        return V[:, int(np.argmax(gaps))]

    def rotation(self, x):
        """Columns (E1, E2, E3) in components of the model's own frame."""
        xi = self._simple_vector(x)
        if xi @ self.ref < 0:
            xi = -xi
        e1 = self.t - (self.t @ xi) * xi
        e1 /= np.linalg.norm(e1)
        return np.column_stack([e1, xi, np.cross(e1, xi)])

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.M.frame(x) @ self.rotation(x)


class _FrameAccess:
    """W, chart frame and frame-to-model rotation for the chosen frame."""

    def __init__(self, M, frame_fn: Optional[Callable]):
        self.M = M
        self.frame_fn = frame_fn

    def omega(self, x):
        if self.frame_fn is None:
            return self.M.omega(x)
        return frame_omega(self.M, x, self.frame_fn, tol=1e-7)

    def chart_frame(self, x):
        if self.frame_fn is None:
            return self.M.frame(x)
        return np.asarray(self.frame_fn(x), float)

    def rotation(self, x):
        """Components of the chosen frame w.r.t. the model's frame."""
        if self.frame_fn is None:
            return np.eye(3)
        return self.M.coframe(x) @ self.chart_frame(x)

    def curvature_op(self, x):
        R = self.rotation(x)
        Rf = np.einsum("abcd,ai,bj,ck,dl->ijkl", self.M.frame_curvature(x), R, R, R, R)
        return curvature_operator(Rf)

    def along(self, x, a, fn, h=H_DERIV):
        """Derivative of fn along the frame field E_a at x."""
        d = self.chart_frame(x)[:, a]
        return (fn(x + h * d) - fn(x - h * d)) / (2 * h)


def _key_entries(W):
    """(Gamma^1_(2,3), Gamma^1_(1,2)) as an array."""
    return np.array([W[0, 1, 2], W[0, 0, 1]])


@dataclass
class StructureReport:
    kind: str  # special_table | m_beta | warped | constant_curvature | none
    beta: Optional[float]
    K: Optional[float]
    constant_curvature: Optional[float]
    profile: List[dict]
    residuals: dict
    region: np.ndarray
    frame_source: str
    tol: float
    beta_signed: Optional[float] = None
    access: Optional[_FrameAccess] = field(default=None, repr=False)

    def label(self):
        if self.kind == "m_beta":
            return f"m_beta({self.beta:.12g})"
        if self.kind == "constant_curvature":
            return f"constant_curvature({self.K:.12g})"
        return self.kind

    def e2(self, x):
        """E2 of the detected frame at x, in components of the model's frame."""
        if self.access is None:
            raise FrameUnavailable("no frame attached to this report")
        return self.access.rotation(np.asarray(x, float))[:, 1]

    def to_dict(self):
        return {"kind": self.kind, "label": self.label(), "beta": self.beta, "K": self.K,
                "constant_curvature": self.constant_curvature,
                "profile": self.profile, "residuals": self.residuals,
                "region_size": int(len(self.region)), "frame_source": self.frame_source,
                "tol": self.tol}


def _isotropy(M, pts, tol):
    """Constant sectional curvature over pts, or None; plus the residual."""
    eig = np.array([np.linalg.eigvalsh(curvature_operator(M.frame_curvature(p))) for p in pts])
    scale = max(1.0, float(np.max(np.abs(eig))))
    spread_point = eig.max(axis=1) - eig.min(axis=1)
    mean = eig.mean()
    res = float(max(spread_point.max(), np.abs(eig - mean).max()))
    degenerate = spread_point < tol * scale
    cc = -float(mean) if res < tol * scale else None
    return cc, res, degenerate


def detect_structure(M, region=None, tol=1e-6, frame: Optional[Callable] = None,
                     seed=0) -> StructureReport:
    """Classify a 3-manifold over a sampled region.

    ``region`` is None (50 quasi-random points), a point count, or an array of
    points.  ``frame`` optionally maps coordinates to a 3x3 matrix whose
    columns are an orthonormal frame field in chart components.
    """
    if M.dim != 3:
        raise DimNot3("structure detection is for 3-manifolds")
    pts = _region_points(M, region, seed)
    cc, iso_res, degenerate = _isotropy(M, pts, tol)
    residuals = {"isotropy": iso_res}

    if frame is not None:
        access, source = _FrameAccess(M, frame), "supplied"
    elif M.adapted_frame:
        access, source = _FrameAccess(M, None), "model"
    elif cc is not None:
        return StructureReport("constant_curvature", None, cc, cc, [], residuals, pts,
                               "none", tol)
    elif np.any(degenerate):
        raise FrameUnavailable("curvature operator is isotropic at some sampled points; supply a frame")
    else:
        access, source = _FrameAccess(M, CurvatureEigenframe(M, pts[0])), "curvature_eigenframe"

    table, deriv = 0.0, 0.0
    keys = []
    key_fn = lambda p: _key_entries(access.omega(p))
    for p in pts:
        W = access.omega(p)
        table = max(table, abs(W[1, 1, 2]), abs(W[1, 0, 1]),
                    abs(W[2, 1, 2] + W[0, 0, 1]), abs(W[2, 0, 1] - W[0, 1, 2]))
        for a in (0, 2):
            deriv = max(deriv, float(np.abs(access.along(p, a, key_fn)).max()))
        keys.append(_key_entries(W))
    keys = np.array(keys)
    residuals["table_pattern"] = float(table)
    residuals["perp_derivatives"] = float(deriv)
    special = table < tol and deriv < tol

    b = keys[:, 0]
    b_mean = float(b.mean())
    residuals["beta_constancy"] = float(np.abs(b - b_mean).max())
    residuals["gamma1_12"] = float(np.abs(keys[:, 1]).max())
    residuals["gamma1_23"] = float(np.abs(b).max())

    def report(kind, beta=None, K=None, profile=(), beta_signed=None):
        return StructureReport(kind, beta, K, cc, list(profile), residuals, pts, source, tol,
                               beta_signed, access)

    if special and residuals["beta_constancy"] < tol and abs(b_mean) > tol \
            and residuals["gamma1_12"] < tol:
        return report("m_beta", beta=abs(b_mean), beta_signed=b_mean)
    if special and residuals["gamma1_23"] < tol:
        prof = [{"x": p.tolist(), "log_derivative": float(-k[1])} for p, k in zip(pts, keys)]
        return report("warped", profile=prof)
    if cc is not None:
        return report("constant_curvature", K=cc)
    if special:
        return report("special_table")
    return report("none")


@dataclass
class ContactInvariants:
    beta: float
    points: np.ndarray
    c: np.ndarray
    gamma1: np.ndarray
    gamma3: np.ndarray
    K2: np.ndarray
    kappa: np.ndarray
    relation_residual: float

    def to_dict(self):
        return {"beta": self.beta, "c": self.c.tolist(), "gamma1": self.gamma1.tolist(),
                "gamma3": self.gamma3.tolist(), "K2": self.K2.tolist(),
                "kappa": self.kappa.tolist(), "relation_residual": self.relation_residual}


def contact_invariants(M, region=None, tol=1e-6, structure: Optional[StructureReport] = None,
                       seed=0) -> ContactInvariants:
    """Structure functions c, gamma1, gamma3 and kappa of an M_beta manifold.

    With F_i = E_i / (2 beta) the functions satisfy
    -kappa = F3(gamma1) - F1(gamma3) + gamma1^2 + gamma3^2 - c, and the worst
    violation over the region is reported as ``relation_residual``.
    """
    s = structure if structure is not None else detect_structure(M, region, tol, seed=seed)
    if s.kind != "m_beta":
        raise NotMBeta(f"{M.name} was classified as {s.label()}")
    beta = s.beta_signed
    acc = s.access

    def entries(p):
        W = acc.omega(p)
        # gamma1, gamma3
        return np.array([W[0, 2, 0], -W[2, 2, 0]]) / (2 * beta)

    cs, g1, g3, K2, res = [], [], [], [], 0.0
    for p in s.region:
        W = acc.omega(p)
        c = (beta + W[1, 2, 0]) / (2 * beta)
        ga, gb = entries(p)
        k2 = -acc.curvature_op(p)[1, 1]
        kappa = k2 / (4 * beta * beta) + 0.75
        F3g1 = acc.along(p, 2, lambda y: entries(y)[0]) / (2 * beta)
        F1g3 = acc.along(p, 0, lambda y: entries(y)[1]) / (2 * beta)
        res = max(res, abs(-kappa - (F3g1 - F1g3 + ga * ga + gb * gb - c)))
        cs.append(c)
        g1.append(ga)
        g3.append(gb)
        K2.append(k2)
    K2 = np.array(K2)
    return ContactInvariants(s.beta, s.region, np.array(cs), np.array(g1), np.array(g3), K2,
                             K2 / (4 * beta * beta) + 0.75, float(res))


@dataclass
class OrbitPrediction:
    dim: int
    case: str
    trace: List[dict]
    structures: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {"dim": self.dim, "case": self.case, "trace": self.trace,
                "structures": [s.to_dict() for s in self.structures]}


def _alignment(A, e, eh):
    """+1 / -1 when A e = +-eh within tolerance, else 0; with both defects."""
    plus = float(np.linalg.norm(A @ e - eh))
    minus = float(np.linalg.norm(A @ e + eh))
    sign = 1 if plus < ALIGN_TOL else (-1 if minus < ALIGN_TOL else 0)
    return sign, plus, minus


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _kappa_constant(M, s, tol):
    ci = contact_invariants(M, structure=s, tol=tol)
    k = ci.kappa
    if np.abs(k - k.mean()).max() < tol * max(1.0, abs(k.mean())):
        return float(k.mean())
    return None


def _warped_K(W: WarpedModel, n=200):
    lo, hi = W.interval
    r = np.linspace(lo, hi, n + 2)[1:-1]
    v = np.array([-W.ddf(t) / W.f(t) for t in r])
    return float(v.mean()), float(np.abs(v - v.mean()).max())


def _predict_mbeta(M, Mh, sM, sMh, A, q0, tol, trace):
    if not _close(sM.beta, sMh.beta, tol):
        trace.append({"predicate": "beta equal", "value": [sM.beta, sMh.beta], "result": False})
        return 9, "open orbit (different beta)"
    sign, plus, minus = _alignment(A, sM.e2(q0.x), sMh.e2(q0.x_hat))
    trace.append({"predicate": "A0 E2 = +-E2^", "value": [plus, minus], "result": sign != 0})
    if sign:
        kM, kMh = _kappa_constant(M, sM, tol), _kappa_constant(Mh, sMh, tol)
        same = kM is not None and kMh is not None and _close(kM, kMh, 1e-6)
        trace.append({"predicate": "kappa constant and equal", "value": [kM, kMh], "result": same})
        if same:
            return 3, "locally isometric (adapted frames matched)"
        return 7, "m_beta: E2 aligned, kappa differs or varies"
    one_cc = (sM.constant_curvature is None) != (sMh.constant_curvature is None)
    trace.append({"predicate": "exactly one constant curvature", "result": one_cc})
    if one_cc:
        return 7, "m_beta: one factor of constant curvature"
    return 8, "m_beta: generic"


def _predict_warped(M, Mh, sM, sMh, A, q0, tol, trace):
    if not (isinstance(M, WarpedModel) and isinstance(Mh, WarpedModel)):
        raise Unclassified("warped structure detected but no explicit warping function is available")
    e = np.zeros(3)
    e[M.radial] = 1.0
    eh = np.zeros(3)
    eh[Mh.radial] = 1.0
    sign, plus, minus = _alignment(A, e, eh)
    trace.append({"predicate": "A0 d/dr = +-d/dr^", "value": [plus, minus], "result": sign != 0})
    r0, rh0 = float(q0.x[0]), float(q0.x_hat[0])
    if sign:
        # sign -1 reverses the radial parameter of the second factor
        lo = max(M.interval[0] - r0, (Mh.interval[0] - rh0) if sign > 0 else (rh0 - Mh.interval[1]))
        hi = min(M.interval[1] - r0, (Mh.interval[1] - rh0) if sign > 0 else (rh0 - Mh.interval[0]))
        t = np.linspace(lo, hi, 202)[1:-1]
        gap = max(abs(M.log_derivative(r0 + s) - sign * Mh.log_derivative(rh0 + sign * s)) for s in t)
        match = gap < tol
        trace.append({"predicate": "f'/f matches along coupled interval", "value": gap, "result": match})
        if match:
            return 6, "warped: radial directions and log-derivatives matched"
    K, dK = _warped_K(M)
    Kh, dKh = _warped_K(Mh)
    sameK = dK < tol and dKh < tol and _close(K, Kh, tol)
    trace.append({"predicate": "f''/f = -K constant on both", "value": [K, Kh, dK, dKh], "result": sameK})
    if not sameK:
        return 9, "open orbit (no warped case applies)"
    if sign:
        gap0 = abs(M.log_derivative(r0) - sign * Mh.log_derivative(rh0))
        trace.append({"predicate": "f'/f(r0) = +-f^'/f^(r^0)", "value": gap0, "result": gap0 < tol})
        if gap0 < tol:
            return 6, "warped: equal constant radial curvature, log-derivative matched at start"
    one_cc = (sM.constant_curvature is None) != (sMh.constant_curvature is None)
    trace.append({"predicate": "exactly one constant curvature", "result": one_cc})
    if one_cc:
        return 6, "warped: equal constant radial curvature, one factor of constant curvature"
    return 8, "warped: equal constant radial curvature, generic"


def predict_orbit_dim(M, Mh, q0: StatePoint, tol=1e-6, region=None, seed=0,
                      structures=None) -> OrbitPrediction:
    """Orbit dimension of the rolling distribution through q0 from the 3D classification."""
    if M.dim != 3 or Mh.dim != 3:
        raise DimNot3("orbit prediction is for pairs of 3-manifolds")
    require_valid(M, Mh, q0)
    if structures is None:
        structures = (detect_structure(M, region, tol, seed=seed),
                      detect_structure(Mh, region, tol, seed=seed))
    sM, sMh = structures
    A = q0.frame_A(M, Mh)
    trace = [{"predicate": "structure", "value": [sM.label(), sMh.label()], "result": True}]
    cM, cMh = sM.constant_curvature, sMh.constant_curvature
    trace.append({"predicate": "constant curvature", "value": [cM, cMh],
                  "result": cM is not None and cMh is not None})

    def done(dim, case):
        return OrbitPrediction(dim, case, trace, (sM, sMh))

    if cM is not None and cMh is not None:
        same = _close(cM, cMh, tol)
        trace.append({"predicate": "equal constant curvature", "result": same})
        return done(3, "locally isometric (equal constant curvature)") if same \
            else done(9, "open orbit (different constant curvature)")
    kinds = {sM.kind, sMh.kind}
    if kinds == {"m_beta"}:
        return done(*_predict_mbeta(M, Mh, sM, sMh, A, q0, tol, trace))
    if kinds == {"warped"}:
        return done(*_predict_warped(M, Mh, sM, sMh, A, q0, tol, trace))
    if kinds == {"m_beta", "constant_curvature"}:
        # a space form of curvature beta^2 carries adapted frames through every direction
        mb = sM if sM.kind == "m_beta" else sMh
        K = cM if cM is not None else cMh
        fits = K > 0 and _close(mb.beta ** 2, K, tol)
        trace.append({"predicate": "K = beta^2", "value": [K, mb.beta], "result": fits})
        return done(7, "m_beta: space form against M_beta, E2 aligned") if fits else done(9, "open orbit (space form not of class M_beta)")
    raise Unclassified(f"no rule covers the pair {sM.label()} / {sMh.label()}")
