"""Scenario runner.

    rollkit run <config|bundled-name> [--out DIR] [--step F] [--seed N]
    rollkit list [--task T] [--json]

A scenario is a JSON object with these fields::

    name         identifier, also the output sub-directory
    description  one line shown by ``rollkit list``
    task         roll | ns_roll | rank | ns_check | holonomy | rolcon |
                 classify3d | extrinsic | cartan
    M, M_hat     manifold specs as accepted by ``rollkit.zoo.make_manifold``
    state        {"x": [...], "x_hat": [...]} plus either "A" (frame
                 components, nested rows) or "alignment": "frame_identity",
                 "aligned_E2" or {"aligned_E2": angle} or {"generic": seed}
    params       task parameters (see the ``_task_*`` functions)
    expect       {result_key: value | {"min": v} | {"max": v} | {"value": v, "tol": t}}
    seed, step   optional; the command-line flags override them
    output_dir   optional; ``--out`` wins, then this, then $ROLL_OUT_DIR

Curves inside params are {"type": "polyline", "points": [...], "durations": [...]},
{"type": "geodesic", "v": [...], "T": t}, {"type": "random", "center": [...],
"amplitude": [...], "length": L, "modes": m, "seed": s} or
{"type": "constant", "point": [...], "duration": t}.

report.json holds inputs, results and the expectation verdicts and is
byte-identical for identical inputs; wall-clock data goes to meta.json.
Exit status: 0 when every expectation holds, 1 otherwise, 2 for a bad config.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation
from scipy.stats import special_ortho_group

from . import controllability as ctl
from . import dynamics as dyn
from . import extrinsic as ext
from . import geometry3d as g3
from .curvature import rol
from .errors import BadSpec, ConfigError, DepthExceeded, RollkitError
from .manifold_core import Curve
from .state_space import StatePoint
from .zoo import make_manifold

DEFAULTS = {"step": 1e-3, "tol": 1e-6, "seed": 0}
TASKS = ("roll", "ns_roll", "rank", "ns_check", "holonomy", "rolcon", "classify3d", "extrinsic", "cartan")
NEEDS_HAT = {"roll", "ns_roll", "rank", "ns_check", "extrinsic", "cartan"}
ENV_OUT = "ROLL_OUT_DIR"
DEFAULT_OUT = "rollkit_runs"


# ---------------------------------------------------------------------------
# config


@dataclass
class Scenario:
    name: str
    task: str
    M: dict
    M_hat: dict | None
    state: dict
    params: dict
    expect: dict
    seed: int
    step: float
    description: str = ""
    output_dir: str | None = None
    source: str = ""
    raw: dict = field(default_factory=dict)


def _require(cond, fld, msg):
    if not cond:
        raise ConfigError(f"{fld}: {msg}")


def parse_scenario(data, source="", step=None, seed=None) -> Scenario:
    _require(isinstance(data, dict), "<root>", "scenario must be a JSON object")
    name = data.get("name")
    _require(isinstance(name, str) and name, "name", "missing or not a string")
    task = data.get("task")
    _require(task in TASKS, "task", f"must be one of {', '.join(TASKS)}")
    _require(isinstance(data.get("M"), dict), "M", "missing manifold spec")
    hat = data.get("M_hat")
    _require(hat is None or isinstance(hat, dict), "M_hat", "must be a manifold spec")
    _require(task not in NEEDS_HAT or hat is not None, "M_hat", f"task {task} needs a second manifold")
    for key in ("state", "params", "expect"):
        _require(isinstance(data.get(key, {}), dict), key, "must be an object")
    for key, spec in data.get("expect", {}).items():
        if isinstance(spec, dict):
            _require(set(spec) <= {"min", "max", "value", "tol"} and spec, f"expect.{key}",
                     "use min, max or value/tol")
    step = float(step if step is not None else data.get("step", DEFAULTS["step"]))
    _require(step > 0, "step", "must be positive")
    seed = int(seed if seed is not None else data.get("seed", DEFAULTS["seed"]))
    return Scenario(name, task, data["M"], hat, data.get("state", {}), data.get("params", {}),
                    data.get("expect", {}), seed, step, data.get("description", ""),
                    data.get("output_dir"), source, data)


def bundled_dir():
    return resources.files("rollkit") / "scenarios"


def bundled_scenarios():
    out = []
    for entry in sorted(bundled_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            data = json.loads(entry.read_text())
            out.append((data.get("name", entry.name[:-5]), data, entry.name))
    return sorted(out, key=lambda t: t[0])


def load_scenario(ref, step=None, seed=None) -> Scenario:
    path = Path(ref)
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<file>: not valid JSON ({exc})") from exc
        return parse_scenario(data, str(path), step, seed)
    for name, data, fname in bundled_scenarios():
        if name == ref or fname == ref:
            return parse_scenario(data, f"bundled:{fname}", step, seed)
    raise ConfigError(f"<config>: no file or bundled scenario named {ref!r}")


def _manifold(spec, fld):
    try:
        return make_manifold(spec)
    except (BadSpec, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{fld}: {exc}") from exc


# ---------------------------------------------------------------------------
# states and curves


def _segment(p, q, duration):
    d = (q - p) / duration
    return Curve(lambda t: p + t * d, lambda t: d, duration)


def build_curve(M, spec, x0, step, fld="params.curve") -> Curve:
    _require(isinstance(spec, dict) and "type" in spec, fld, "curve needs a type")
    kind = spec["type"]
    if kind == "polyline":
        pts = np.asarray(spec.get("points"), float)
        _require(pts.ndim == 2 and len(pts) >= 2 and pts.shape[1] == M.dim, f"{fld}.points",
                 "need at least two points of the right dimension")
        durs = spec.get("durations") or [float(np.linalg.norm(b - a)) for a, b in zip(pts[:-1], pts[1:])]
        _require(len(durs) == len(pts) - 1, f"{fld}.durations", "one duration per segment")
        curve = None
        for a, b, d in zip(pts[:-1], pts[1:], durs):
            seg = _segment(a, b, float(d))
            curve = seg if curve is None else curve.then(seg)
        return curve
    if kind == "geodesic":
        start = np.asarray(spec.get("start", x0), float)
        return dyn.geodesic_curve(M, start, np.asarray(spec["v"], float), float(spec["T"]), step)
    if kind == "random":
        return dyn.random_curve(M, spec.get("center", x0), spec["amplitude"], float(spec["length"]),
                                int(spec.get("modes", 4)), int(spec.get("seed", 0)))
    if kind == "constant":
        return Curve.constant(np.asarray(spec.get("point", x0), float), float(spec.get("duration", 1.0)))
    raise ConfigError(f"{fld}.type: unknown curve type {kind!r}")


def _aligned_e2(M, Mh, x, xh, angle):
    e = g3.detect_structure(M, np.array([x])).e2(x)
    eh = g3.detect_structure(Mh, np.array([xh])).e2(xh)
    R, _ = Rotation.align_vectors([eh], [e])
    return Rotation.from_rotvec(angle * eh).as_matrix() @ R.as_matrix()


def build_state(M, Mh, spec, curve_start=None) -> StatePoint:
    x = spec.get("x", None if curve_start is None else list(curve_start))
    _require(x is not None, "state.x", "missing")
    x = np.asarray(x, float)
    xh = np.asarray(spec.get("x_hat", np.zeros(Mh.dim)), float)
    if "A" in spec:
        A = np.asarray(spec["A"], float)
    else:
        al = spec.get("alignment", "frame_identity")
        n, nh = M.dim, Mh.dim
        if al == "frame_identity":
            A = np.eye(nh, n)
        elif al == "aligned_E2" or (isinstance(al, dict) and "aligned_E2" in al):
            angle = 1.0 if al == "aligned_E2" else float(al["aligned_E2"])
            A = _aligned_e2(M, Mh, x, xh, angle)
        elif isinstance(al, dict) and "generic" in al:
            _require(n == nh, "state.alignment", "generic alignment needs equal dimensions")
            A = np.eye(1) if n == 1 else special_ortho_group.rvs(n, random_state=int(al["generic"]))
        else:
            raise ConfigError(f"state.alignment: unknown alignment {al!r}")
    try:
        return StatePoint(x, xh, A)
    except RollkitError as exc:
        raise ConfigError(f"state: {exc}") from exc


# ---------------------------------------------------------------------------
# tasks


@dataclass
class TaskOutput:
    results: dict
    tables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _traj_table(traj):
    return list(traj.csv_header()), list(traj.csv_rows())


def _max_gap(M, Mh, t1, t2):
    k = min(len(t1.ts), len(t2.ts))
    return max(max(M.chart_gap(t1.xs[i], t2.xs[i]), Mh.chart_gap(t1.xhats[i], t2.xhats[i]),
                   float(np.abs(t1.As[i] - t2.As[i]).max())) for i in range(k))


def _rotation_angle(R):
    if R.shape == (2, 2):
        return abs(math.atan2(R[1, 0], R[0, 0]))
    return math.acos(max(-1.0, min(1.0, (np.trace(R) - 1) / 2)))


def _isometry(Mh, spec):
    kind = spec.get("type")
    ang = float(spec.get("angle", 0.0))
    if kind == "plane_motion":
        R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        c = np.asarray(spec.get("shift", [0.0, 0.0]), float)
        return (lambda y: R @ y + c), (lambda y: R)
    if kind == "polar_rotation":
        return (lambda y: y + np.array([0.0, ang])), (lambda y: np.eye(2))
    raise ConfigError(f"params.equivariance.type: unknown isometry {kind!r}")


def _task_roll(sc, M, Mh):
    p = sc.params
    curve = build_curve(M, p.get("curve"), sc.state.get("x"), sc.step)
    q0 = build_state(M, Mh, sc.state, curve.position(0.0))
    traj = dyn.integrate_rolling(M, Mh, q0, dyn.ControlPath(curve), sc.step,
                                 reorthonormalize=bool(p.get("reorthonormalize", False)))
    res = {"max_isometry_defect": traj.max_residual("isometry_defect"),
           "max_noslip_defect": traj.max_residual("noslip_defect"),
           "max_nospin_defect": traj.max_residual("nospin_defect"),
           "duration": curve.duration, "curve_length": curve.length(M),
           "n_samples": len(traj.ts), "final_state": traj.final.to_dict()}
    if p.get("factorization"):
        res["factorization_error"] = dyn.factorization_error(M, Mh, traj, sc.step, curve=curve)
    if p.get("closed_form"):
        spec = p["curve"]
        _require(spec.get("type") == "geodesic", "params.closed_form", "needs a geodesic curve")
        from .manifold_core import TangentVector
        v = TangentVector(q0.x, np.asarray(spec["v"], float), "chart")
        closed = dyn.roll_geodesic(M, Mh, q0, v, float(spec["T"]), sc.step)
        res["closed_form_error"] = _max_gap(M, Mh, closed, traj)
    if p.get("flat_target"):
        _, rho = dyn.roll_onto_flat(M, Mh, q0, curve, sc.step, require_loop=True)
        res["rho_rotation_angle"] = _rotation_angle(rho.rotation)
        res["rho_translation"] = rho.translation.tolist()
        if "second_loop" in p:
            other = build_curve(M, p["second_loop"], q0.x, sc.step, "params.second_loop")
            _, r2 = dyn.roll_onto_flat(M, Mh, q0, other, sc.step, require_loop=True)
            _, r12 = dyn.roll_onto_flat(M, Mh, q0, curve.then(other), sc.step, require_loop=True)
            prod = rho.star(r2)
            res["antihomomorphism_error"] = float(max(np.abs(prod.rotation - r12.rotation).max(),
                                                      np.abs(prod.translation - r12.translation).max()))
    if p.get("duality"):
        res["duality_error"] = dyn.transpose_duality_error(M, Mh, q0, curve, sc.step)
    if "equivariance" in p:
        iso, diso = _isometry(Mh, p["equivariance"])
        res["equivariance_error"] = dyn.equivariance_error(M, Mh, q0, curve, iso, diso, sc.step)
    return TaskOutput(res, {"trajectory.csv": _traj_table(traj)})


def _task_ns_roll(sc, M, Mh):
    p = sc.params
    curve = build_curve(M, p.get("curve"), sc.state.get("x"), sc.step)
    curve_hat = build_curve(Mh, p.get("curve_hat"), sc.state.get("x_hat"), sc.step, "params.curve_hat")
    st = dict(sc.state)
    st.setdefault("x_hat", curve_hat.position(0.0).tolist())
    q0 = build_state(M, Mh, st, curve.position(0.0))
    traj = dyn.integrate_rolling(M, Mh, q0, dyn.ControlPath(curve, curve_hat, mode="NS"), sc.step)
    res = {"max_isometry_defect": traj.max_residual("isometry_defect"),
           "max_nospin_defect": traj.max_residual("nospin_defect"),
           "max_slip": traj.max_residual("noslip_defect"),
           "n_samples": len(traj.ts), "final_state": traj.final.to_dict()}
    return TaskOutput(res, {"trajectory.csv": _traj_table(traj)})


def _rol_norm(M, Mh, q):
    n = M.dim
    E = np.eye(n)
    return max((float(np.linalg.norm(rol(M, Mh, q, E[a], E[b]))) for a in range(n) for b in range(a + 1, n)),
               default=0.0)


def _rank_results(report):
    return {"final_rank": report.final_rank, "level_ranks": list(report.level_ranks),
            "dim_Q": report.dim_Q, "gap_ratio": report.gap_ratio, "depth": report.depth,
            "attained_depth": report.attained_depth,
            "singular_values": [float(s) for s in report.singular_values]}


def _task_rank(sc, M, Mh):
    p = sc.params
    q0 = build_state(M, Mh, sc.state)
    kw = {"max_depth": int(p.get("max_depth", 5)), "tol": float(p.get("tol", DEFAULTS["tol"])),
          "flow_step": float(p.get("flow_step", 1e-2)), "substeps": int(p.get("substeps", 8)),
          "seed": sc.seed}
    meta = {}
    try:
        report = ctl.lie_rank(M, Mh, q0, **kw)
        res = _rank_results(report)
        res["depth_exceeded"] = False
    except DepthExceeded as exc:
        report = exc.report
        res = _rank_results(report)
        res["depth_exceeded"] = True
    meta["rank_seconds"] = report.seconds
    if M.dim == Mh.dim:
        res["rol_norm"] = _rol_norm(M, Mh, q0)
    if p.get("predict") and M.dim == 3 and Mh.dim == 3:
        pred = g3.predict_orbit_dim(M, Mh, q0, seed=sc.seed)
        res["predicted_dim"] = pred.dim
        res["predicted_case"] = pred.case
        res["prediction_trace"] = pred.trace
        res["prediction_matches"] = pred.dim == res["final_rank"]
    if p.get("level2_convergence"):
        steps, errs, order = ctl.level2_convergence(M, Mh, q0)
        res["level2_errors"] = [float(e) for e in errs]
        res["level2_order"] = float(order)
    rows = [[sc.name, 0, d + 1, r] for d, r in enumerate(report.level_ranks)]
    return TaskOutput(res, {"ranks.csv": (["scenario", "q_id", "depth", "rank"], rows)}, meta)


def _task_ns_check(sc, M, Mh):
    p = sc.params
    x0 = sc.state.get("x")
    xh0 = sc.state.get("x_hat")
    rep = ctl.ns_controllable(M, Mh, int(p.get("n_A_samples", 20)),
                              None if x0 is None else np.asarray(x0, float),
                              None if xh0 is None else np.asarray(xh0, float), seed=sc.seed)
    return TaskOutput({"controllable": rep.controllable, "worst_deficiency": rep.worst_deficiency,
                       "dims": list(rep.dims), "hol_dim": rep.hol_dim, "hol_hat_dim": rep.hol_hat_dim})


def _task_holonomy(sc, M, Mh):
    p = sc.params
    x0 = np.asarray(sc.state.get("x", M.sample_points(1, seed=sc.seed)[0]), float)
    h = ctl.holonomy_algebra(M, x0, int(p.get("n_loops", 6)), float(p.get("loop_scale", 0.3)),
                             int(p.get("n_points", 40)), seed=sc.seed)
    res = {"dim": h.dim, "so_dim": M.dim * (M.dim - 1) // 2, "base": x0.tolist()}
    if Mh is not None:
        xh0 = np.asarray(sc.state.get("x_hat", Mh.sample_points(1, seed=sc.seed)[0]), float)
        res["dim_hat"] = ctl.holonomy_algebra(Mh, xh0, int(p.get("n_loops", 6)), float(p.get("loop_scale", 0.3)),
                                              int(p.get("n_points", 40)), seed=sc.seed).dim
    return TaskOutput(res)


def _task_rolcon(sc, M, Mh):
    p = sc.params
    _require("k" in p, "params.k", "missing")
    k = float(p["k"])
    x = np.asarray(sc.state.get("x", M.sample_points(1, seed=sc.seed)[0]), float)
    res = {}
    tables = {}
    if "transport" in p:
        t = p["transport"]
        curve = build_curve(M, t.get("curve"), x.tolist(), sc.step, "params.transport.curve")
        s0 = t.get("state0", {"X": [0.0] * M.dim, "r": 1.0})
        path = ctl.rolcon_transport(M, k, curve, ctl.RolConState(np.asarray(s0["X"], float), float(s0["r"])), sc.step)
        res["hk_drift"] = path.hk_drift()
        res["final_X"] = path.Xs[-1].tolist()
        res["final_r"] = float(path.rs[-1])
        tables["rolcon.csv"] = (["t"] + [f"X{i}" for i in range(M.dim)] + ["r"],
                                [[float(tt)] + X.tolist() + [float(r)] for tt, X, r in zip(path.ts, path.Xs, path.rs)])
    if "geodesic_check" in p:
        g = p["geodesic_check"]
        v = np.asarray(g["v"], float)  # frame components
        v = v / np.linalg.norm(v)
        T = float(g.get("T", math.pi / 2))
        vc = M.frame(x) @ v
        gc = dyn.geodesic_curve(M, x, vc, T, sc.step)
        path = ctl.rolcon_transport(M, k, gc, ctl.RolConState(np.zeros(M.dim), 1.0), sc.step)
        w = 1.0 / math.sqrt(k)
        err = 0.0
        for tt, X, r in zip(path.ts, path.Xs, path.rs):
            gd = M.coframe(gc.position(tt)) @ gc.velocity(tt)
            err = max(err, float(np.abs(X + math.sqrt(k) * math.sin(w * tt) * gd).max()), abs(r - math.cos(w * tt)))
        res["geodesic_transport_error"] = err
        res["geodesic_hk_drift"] = path.hk_drift()
    if "small_loop" in p:
        area = float(p["small_loop"].get("area", 1e-2))
        _, _, L = ctl.small_loop_holonomy(M, k, x, area, sc.step)
        E = np.eye(M.dim)
        F = ctl.rolcon_curvature(M, k, x, E[0], E[1])
        res["small_loop_error"] = float(np.abs(L - F).max())
    if "reducibility" in p:
        r = p["reducibility"]
        rep = ctl.rolcon_reducibility(M, k, x, int(r.get("n_loops", 8)), float(r.get("loop_scale", 0.4)),
                                      seed=sc.seed)
        res["invariant_dims"] = list(rep.dims)
        res["n_invariant_subspaces"] = len(rep.dims)
        res["irreducible"] = rep.irreducible
    return TaskOutput(res, tables)


_PROFILE_REFS = {"tanh": math.tanh, "cot": lambda r: 1.0 / math.tan(r), "zero": lambda r: 0.0,
                 "neg_tan": lambda r: -math.tan(r)}


def _structure_results(M, s, tag, p, seed):
    res = {f"structure_{tag}": s.label(), f"kind_{tag}": s.kind, f"beta_{tag}": s.beta,
           f"constant_curvature_{tag}": s.constant_curvature,
           f"residuals_{tag}": s.residuals}
    defining = [v for key, v in s.residuals.items() if key in ("table_pattern", "perp_derivatives", "beta_constancy")]
    if s.kind == "m_beta":
        defining.append(s.residuals["gamma1_12"])
        ci = g3.contact_invariants(M, structure=s)
        res[f"kappa_{tag}"] = float(np.mean(ci.kappa))
        res[f"K2_{tag}"] = float(np.mean(ci.K2))
        res[f"c_{tag}"] = float(np.mean(ci.c))
        res[f"gamma1_{tag}"] = float(np.max(np.abs(ci.gamma1)))
        res[f"gamma3_{tag}"] = float(np.max(np.abs(ci.gamma3)))
        res[f"kappa_spread_{tag}"] = float(np.ptp(ci.kappa))
        res[f"relation_residual_{tag}"] = ci.relation_residual
    if s.kind == "warped":
        defining.append(s.residuals["gamma1_23"])
        ref = p.get(f"profile_reference_{tag}", p.get("profile_reference"))
        if ref is not None:
            _require(ref in _PROFILE_REFS, "params.profile_reference", f"one of {sorted(_PROFILE_REFS)}")
            f = _PROFILE_REFS[ref]
            res[f"profile_error_{tag}"] = max(abs(d["log_derivative"] - f(d["x"][0])) for d in s.profile)
    res[f"max_residual_{tag}"] = float(max(defining)) if defining else None
    return res


def _task_classify3d(sc, M, Mh):
    p = sc.params
    region = int(p.get("samples", 50))
    tol = float(p.get("tol", DEFAULTS["tol"]))
    sM = g3.detect_structure(M, region, tol, seed=sc.seed)
    res = _structure_results(M, sM, "M", p, sc.seed)
    if Mh is None:
        return TaskOutput(res)
    sMh = g3.detect_structure(Mh, region, tol, seed=sc.seed)
    res.update(_structure_results(Mh, sMh, "M_hat", p, sc.seed))
    meta = {}
    if "x" in sc.state:
        q0 = build_state(M, Mh, sc.state)
        pred = g3.predict_orbit_dim(M, Mh, q0, tol, structures=(sM, sMh))
        res["predicted_dim"] = pred.dim
        res["predicted_case"] = pred.case
        res["prediction_trace"] = pred.trace
        if p.get("measure"):
            try:
                rep = ctl.lie_rank(M, Mh, q0, seed=sc.seed)
            except DepthExceeded as exc:
                rep = exc.report
            res["measured_rank"] = rep.final_rank
            res["prediction_matches"] = rep.final_rank == pred.dim
            meta["rank_seconds"] = rep.seconds
    return TaskOutput(res, {}, meta)


def _task_extrinsic(sc, M, Mh):
    p = sc.params
    try:
        ext._check_pair(M, Mh)
    except BadSpec as exc:
        raise ConfigError(f"M: {exc}") from exc
    b = float(p.get("b", 1.0))
    curve = build_curve(M, p.get("curve"), sc.state.get("x"), sc.step)
    q0 = build_state(M, Mh, sc.state, curve.position(0.0))
    traj = dyn.integrate_rolling(M, Mh, q0, dyn.ControlPath(curve), sc.step)
    corr = ext.correspondence(M, Mh, traj, b)
    direct = ext.integrate_rolling_map(M, curve, corr.state(0).G, sc.step, b)
    back = ext.inverse_correspondence(M, Mh, corr)
    res = {f"max_{k}": direct.max_residual(k) for k in ext.RESIDUALS}
    res["max_orthogonality"] = direct.max_residual("orthogonality")
    res.update({f"corr_max_{k}": corr.max_residual(k) for k in ext.RESIDUALS})
    res["correspondence_gap"] = float(max(np.abs(direct.Us - corr.Us).max(), np.abs(direct.ps - corr.ps).max()))
    res["roundtrip_error"] = _max_gap(M, Mh, back, traj)
    res["return_error"] = float(np.abs(direct.Us[-1] - direct.Us[0]).max())
    res["rotation_about_normal"] = abs(ext.rotation_about_normal(direct.Us[0], direct.Us[-1]))
    if p.get("compare_flat"):
        _, rho = dyn.roll_onto_flat(M, Mh, q0, curve, sc.step, require_loop=True)
        gap = ext.rotation_about_normal(direct.Us[0], direct.Us[-1]) - math.atan2(rho.rotation[1, 0], rho.rotation[0, 0])
        res["flat_angle_gap"] = abs(math.remainder(gap, 2 * math.pi))
    return TaskOutput(res, {"extrinsic.csv": (direct.csv_header(), list(direct.csv_rows()))})


def _task_cartan(sc, M, Mh):
    p = sc.params
    q0 = build_state(M, Mh, sc.state)
    rep = dyn.cartan_map(M, Mh, q0, float(p.get("radius", 0.5)), int(p.get("n_dirs", 6)),
                         int(p.get("n_radii", 4)), sc.step, seed=sc.seed)
    return TaskOutput(rep.to_dict())


TASK_FUNCS = {"roll": _task_roll, "ns_roll": _task_ns_roll, "rank": _task_rank, "ns_check": _task_ns_check,
              "holonomy": _task_holonomy, "rolcon": _task_rolcon, "classify3d": _task_classify3d,
              "extrinsic": _task_extrinsic, "cartan": _task_cartan}


# ---------------------------------------------------------------------------
# expectations and output


def check_expectation(actual, spec):
    if actual is None:
        return False
    if isinstance(actual, str) and actual in ("inf", "-inf", "nan"):
        actual = float(actual)
    if isinstance(spec, dict):
        ok = True
        if "min" in spec:
            ok &= actual >= spec["min"]
        if "max" in spec:
            ok &= actual <= spec["max"]
        if "value" in spec:
            ok &= abs(actual - spec["value"]) <= spec.get("tol", 0.0)
        return bool(ok)
    if isinstance(spec, bool) or isinstance(actual, bool):
        return actual is spec or actual == spec
    if isinstance(spec, (int, float)) and isinstance(actual, (int, float)):
        return abs(actual - spec) <= 1e-9 * max(1.0, abs(spec))
    return actual == spec


def plain(obj):
    """JSON-ready copy: numpy scalars and arrays converted, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def output_dir(sc: Scenario, out=None) -> Path:
    base = out or sc.output_dir or os.environ.get(ENV_OUT) or DEFAULT_OUT
    return Path(base) / sc.name


def run_scenario(sc: Scenario, out=None) -> tuple[dict, Path]:
    """Run one scenario and write its report files; returns (report, directory)."""
    M = _manifold(sc.M, "M")
    Mh = _manifold(sc.M_hat, "M_hat") if sc.M_hat is not None else None
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    error = None
    try:
        output = TASK_FUNCS[sc.task](sc, M, Mh)
    except ConfigError:
        raise
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"params: missing or malformed entry ({exc})") from exc
    except RollkitError as exc:
        error = f"{type(exc).__name__}: {exc}"
        output = TaskOutput({})
    elapsed = time.perf_counter() - t0
    results = plain(output.results)
    verdicts = []
    for key in sorted(sc.expect):
        actual = results.get(key)
        verdicts.append({"key": key, "expected": plain(sc.expect[key]), "actual": actual,
                         "passed": error is None and check_expectation(actual, sc.expect[key])})
    report = {
        "scenario": sc.name, "task": sc.task, "description": sc.description,
        "inputs": plain({"M": sc.M, "M_hat": sc.M_hat, "state": sc.state, "params": sc.params,
                         "expect": sc.expect, "seed": sc.seed, "step": sc.step}),
        "defaults": DEFAULTS, "results": results, "error": error,
        "expectations": verdicts, "passed": error is None and all(v["passed"] for v in verdicts),
    }
    d = output_dir(sc, out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    meta = {"started_utc": started.isoformat(), "elapsed_seconds": elapsed, "source": sc.source,
            "python": platform.python_version(), "numpy": np.__version__, **plain(output.meta)}
    (d / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    for fname, (header, rows) in output.tables.items():
        _write_csv(d / fname, header, rows)
    return report, d


# ---------------------------------------------------------------------------
# command line


def _cmd_run(args):
    try:
        sc = load_scenario(args.config, args.step, args.seed)
        report, d = run_scenario(sc, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for v in report["expectations"]:
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['key']}: expected {v['expected']}, got {v['actual']}")
    if report["error"]:
        print(f"[{sc.name}] {report['error']}", file=sys.stderr)
    print(f"{sc.name}: {'passed' if report['passed'] else 'FAILED'} -> {d}")
    return 0 if report["passed"] else 1


def _cmd_list(args):
    rows = [{"name": n, "task": d.get("task"), "description": d.get("description", ""), "file": f}
            for n, d, f in bundled_scenarios() if args.task is None or d.get("task") == args.task]
    if args.json:
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        width = max((len(r["name"]) for r in rows), default=0)
        for r in rows:
            print(f"{r['name']:<{width}}  {r['task']:<10}  {r['description']}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="rollkit", description="Run rolling-manifold scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or a bundled scenario by name")
    run.add_argument("config")
    run.add_argument("--out", default=None, help=f"output directory (fallback ${ENV_OUT})")
    run.add_argument("--step", type=float, default=None, help="integration step override")
    run.add_argument("--seed", type=int, default=None, help="random seed override")
    run.set_defaults(func=_cmd_run)
    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.add_argument("--task", choices=TASKS, default=None)
    ls.add_argument("--json", action="store_true", help="machine-readable catalog")
    ls.set_defaults(func=_cmd_list)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
