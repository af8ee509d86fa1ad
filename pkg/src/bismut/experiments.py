"""Verification experiments: each returns a list of case records plus diagnostics.

A case is ``{id, lhs, rhs, residual, tolerance, check, pass}``.  ``check``
says how ``pass`` was decided: ``abs`` (residual <= tolerance), ``exceeds``
(lhs > tolerance), ``negative`` (lhs < 0) or ``true`` (boolean verdict).
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import comparison as cmp
from .chart import MetricModel, d_omega_tensor, j_matrix, to_complex
from .connections import defining_relation_residuals, gamma_table, point_jet, torsion_sb
from .curvature import (
    balanced_identities,
    bianchi_defect,
    conjugation_residual,
    curvature,
    hsc_from_field,
    pair_defect,
    ricci_complexified_from_field,
    ricci_real_from_field,
    skew_residual,
    type_vanishing_residual,
)
from .errors import GeometryError, InconclusiveK
from .geodesy import FieldAlongCurve, _contract, _jet
from .numerics import simpson
from .variational import (
    VariationSurface,
    index_form,
    mixed_partial_energy_fd,
    random_trig_field,
    sb_parallel_residual,
    second_variation_sb,
    synge_field,
)

EXPERIMENTS = ("identities", "thm11", "thm12", "myers", "synge", "laplacian", "volume")

def case(cid: str, lhs, rhs=0.0, tolerance=0.0, check: str = "abs") -> dict:
    lhs_f = float(lhs)
    rhs_f = float(rhs)
    if check == "abs":
        residual = abs(lhs_f - rhs_f)
        ok = residual <= tolerance
    elif check == "exceeds":
        residual, ok = lhs_f, lhs_f > tolerance
    elif check == "negative":
        residual, ok = lhs_f, lhs_f < 0
    elif check == "true":
        residual, ok = float(not bool(lhs)), bool(lhs)
    else:
        raise ValueError(check)
    return {"id": cid, "lhs": lhs_f, "rhs": rhs_f, "residual": residual, "tolerance": float(tolerance),
            "check": check, "pass": bool(ok and math.isfinite(residual))}


def error_case(cid: str, exc: Exception) -> dict:
    return {"id": cid, "lhs": None, "rhs": None, "residual": None, "tolerance": None, "check": "error",
            "pass": False, "error": f"{type(exc).__name__}: {exc}"}


def guarded(cid: str, fn: Callable[[], list[dict]]) -> list[dict]:
    try:
        return fn()
    except GeometryError as exc:
        return [error_case(cid, exc)]


def _mirror(table: np.ndarray, n: int) -> np.ndarray:
    perm = np.r_[n: 2 * n, 0:n]
    out = table
    for ax in range(1, 4):
        out = np.take(out, perm, axis=-ax)
    return out


def identities(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """Connection, torsion and curvature identities on seeded sample points."""
    n = model.n
    count = int(params.get("points", 50))
    pts = model.sample_points(rng, count)
    X, Y, Z, W = rng.normal(size=(4, count, 2 * n))
    cj = point_jet(model, pts, order=2)
    g_lc, g_sb = gamma_table("lc", cj), gamma_table("sb", cj)
    tors = torsion_sb(model, pts)
    r_lc, r_sb = curvature("lc", model, pts), curvature("sb", model, pts)
    res = defining_relation_residuals(model, pts, X, Y, Z)
    out = [
        case("identities/defining_relation", res.r_defn, 0, 1e-7),
        case("identities/torsion_equals_domega", res.r_torsion, 0, 1e-7),
        case("identities/sb_minus_lc_half_torsion", np.max(np.abs(g_sb - g_lc - 0.5 * tors.full)), 0, 1e-8),
        case("identities/connection_conjugation", max(np.max(np.abs(_mirror(g, n) - g.conj())) for g in (g_lc, g_sb)),
             0, 1e-12),
        case("identities/torsion_skew", np.max(np.abs(tors.lowered + np.swapaxes(tors.lowered, -1, -2))), 0, 1e-10),
        case("identities/curvature_skew_lc", skew_residual(r_lc), 0, 1e-8),
        case("identities/curvature_skew_sb", skew_residual(r_sb), 0, 1e-8),
        case("identities/sb_type_vanishing", type_vanishing_residual(r_sb), 0, 1e-8),
        case("identities/curvature_conjugation", max(conjugation_residual(r_lc), conjugation_residual(r_sb)), 0, 1e-10),
        case("identities/lc_pair_symmetry", np.max(np.abs(r_lc.r - np.einsum("...abcd->...cdab", r_lc.r))), 0, 1e-8),
    ]
    scale = max(1.0, float(np.max(np.abs(r_sb.r))))
    ric_a = ricci_real_from_field(r_sb, X, Y)
    ric_b = ricci_complexified_from_field(r_sb, X, Y)
    out.append(case("identities/ricci_two_routes", np.max(np.abs(ric_a - ric_b)) / scale, 0, 1e-8))
    out.append(case("identities/ricci_real_valued", np.max(np.abs(np.imag(ric_b))) / scale, 0, 1e-10))
    c = rng.uniform(0.2, 5.0, size=(count, 1))
    out.append(case("identities/hsc_scale_invariance",
                    np.max(np.abs(hsc_from_field(r_sb, c * X) - hsc_from_field(r_sb, X))), 0, 1e-9))
    diag: dict = {"points": count}
    if model.kahler_expected:
        out += [
            case("identities/kahler_torsion", np.max(np.abs(tors.full)), 0, 1e-7),
            case("identities/kahler_domega", np.max(np.abs(d_omega_tensor(model, pts))), 0, 1e-7),
            case("identities/kahler_connection_gap", np.max(np.abs(g_sb - g_lc)), 0, 1e-7),
            case("identities/kahler_curvature_gap", np.max(np.abs(r_sb.r - r_lc.r)), 0, 1e-7),
        ]
    bal = balanced_identities(model, pts, rng)
    checks = {
        "trace_torsion": (bal.trace_torsion, 1e-8),
        "ricci_identity": (bal.ricci_identity, 1e-7),
        "holomorphic_trace": (bal.holomorphic_trace, 1e-7),
        "hermitian_defect": (bal.hermitian_defect, 1e-7),
    }
    if model.balanced_expected:
        out += [case(f"identities/balanced_{k}", np.max(v), 0, tol) for k, (v, tol) in checks.items()]
    else:
        diag["balanced_residuals"] = {k: float(np.max(v)) for k, (v, _) in checks.items()}
    if not model.kahler_expected:
        trials = int(params.get("witness_trials", 200))
        wp = model.sample_points(rng, trials)
        wv = rng.normal(size=(4, trials, 2 * n))
        fld = curvature("sb", model, wp)
        out.append(case("identities/bianchi_witness", np.max(bianchi_defect(fld, *wv)), 0, 1e-3, "exceeds"))
        out.append(case("identities/pair_witness", np.max(pair_defect(fld, *wv)), 0, 1e-3, "exceeds"))
    return out, diag


def _geodesic(model, rng, length, steps):
    return cmp._sample_geodesic(model, rng, length, steps)


def thm11(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """SB second-variation quadrature against the finite-difference mixed partial of the energy."""
    count = int(params.get("cases", 20))
    length = float(params.get("length", 1.0))
    steps = int(params.get("steps", 200))
    delta = float(params.get("delta", 1e-3))
    out = []
    for k in range(count):
        cid = f"thm11/{k:03d}"

        def run():
            c = _geodesic(model, rng, length, steps)
            V = random_trig_field(c, rng)
            W = random_trig_field(c, rng)
            lhs = second_variation_sb(model, c, V, W)
            rhs = mixed_partial_energy_fd(model, VariationSurface(c, "linear_fields", V, W), delta)
            return [case(cid, lhs, rhs, max(1e-3 * abs(rhs), 1e-5))]

        out += guarded(cid, run)
    return out, {"length": length, "steps": steps, "delta": delta}


def thm12(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """LC index form against SB bulk plus the torsion boundary term, for non-proper fields."""
    count = int(params.get("cases", 20))
    length = float(params.get("length", 1.0))
    steps = int(params.get("steps", 200))
    out = []
    for k in range(count):
        cid = f"thm12/{k:03d}"

        def run():
            c = _geodesic(model, rng, length, steps)
            V = random_trig_field(c, rng, proper=False)
            W = random_trig_field(c, rng, proper=False)
            r = index_form(model, c, V, W)
            rr = index_form(model, c, W, V)
            same = index_form(model, c, V, V)
            return [
                case(cid, r.value_lc, r.value_sb_bulk + r.boundary_term, 1e-6),
                case(cid + "/diagonal_boundary", same.boundary_term, 0, 1e-8),
                case(cid + "/lc_symmetry", r.value_lc, rr.value_lc, 1e-8),
            ]

        out += guarded(cid, run)
    return out, {"length": length, "steps": steps}


def _resolve_K(model, params, rng, source):
    K = params.get("K", "auto")
    if K == "auto":
        est = cmp.estimate_K(model, rng, int(params.get("k_samples", 64)), source)
        return est.value, est.__dict__
    return float(K), None


def myers(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """Myers-field second variation sum, its closed form, and the diameter estimate."""
    try:
        K, est = _resolve_K(model, params, rng, "ricci")
    except InconclusiveK as exc:
        return [], {"status": "not_applicable", "reason": str(exc)}
    cfg = {"geodesics": int(params.get("geodesics", 2)), "steps": int(params.get("steps", 400)),
           "seed": int(rng.integers(2**31)), "diameter": bool(params.get("diameter", True))}
    rep = cmp.myers_diameter_experiment(model, K, cfg)
    out = []
    for k, cs in enumerate(rep.get("cases", [])):
        out.append(case(f"myers/{k:03d}/closed_form", cs["myers_sum"], cs["myers_integral"], 1e-5))
        out.append(case(f"myers/{k:03d}/negative", cs["myers_sum"], 0, 0, "negative"))
    if "diameter" in rep:
        d = rep["diameter"]
        out.append(case("myers/diameter", d["estimate"], d["bound"], 0.005 * d["bound"]))
    return out, {"K": K, "K_estimate": est, "length": rep.get("length"), "status": rep.get("status")}


def synge(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """Second variation of sin(pi t/L) J gamma' at L slightly above pi/sqrt(K)."""
    try:
        K, est = _resolve_K(model, params, rng, "hsc")
    except InconclusiveK as exc:
        return [], {"status": "not_applicable", "reason": str(exc)}
    L = float(params.get("stretch", 1.05)) * math.pi / math.sqrt(K)
    steps = int(params.get("steps", 400))
    out = []
    for k in range(int(params.get("geodesics", 2))):
        cid = f"synge/{k:03d}"

        def run():
            c = _geodesic(model, rng, L, steps)
            s = synge_field(model, c)
            val = index_form(model, c, s, s).value_sb_bulk
            vp = s.covariant("sb")
            tors = torsion_sb(model, to_complex(c.x))
            tterm = simpson(tors(s.values, c.v, vp), c.dt, axis=-1)
            jm = j_matrix(model.n)
            acc = -_contract(gamma_table("lc", _jet(model, c.x)), c.v, c.v)
            jres = sb_parallel_residual(model, FieldAlongCurve(c, c.v @ jm.T, acc @ jm.T))
            return [case(cid, val, 0, 0, "negative"),
                    case(cid + "/torsion_term", tterm, 0, 1e-7),
                    case(cid + "/j_tangent_parallel", jres, 0, 1e-7)]

        out += guarded(cid, run)
    return out, {"K": K, "K_estimate": est, "length": L}


def _saturates(model: MetricModel, params: dict) -> bool:
    # exact equality only for flat space and constant-curvature surfaces
    default = model.name == "flat" or (model.n == 1 and model.hsc_constant is not None)
    return bool(params.get("saturate", default))


def _comparison_setup(model, params, rng):
    n = model.n
    point = params.get("point")
    z = np.zeros(n, complex) if point is None else np.asarray(point[:n], float) + 1j * np.asarray(point[n:], float)
    K = params.get("K", "auto")
    if K == "auto":
        K = model.hsc_constant if model.hsc_constant is not None and n == 1 else None
        if K is None:
            try:
                K = cmp.estimate_K(model, rng, int(params.get("k_samples", 64)), "ricci").value
            except InconclusiveK:
                K = 0.0
    K = float(K)
    hi = params.get("rho_max")
    if hi is None:
        hi = 0.9 * min(model.injectivity_bound, 2.0, math.pi / math.sqrt(K) if K > 0 else 2.0)
    grid = np.linspace(float(params.get("rho_min", 0.1)), float(hi), int(params.get("rho_count", 8)))
    dirs = cmp.default_directions(n, params.get("directions"))
    return z, K, grid, dirs


def laplacian(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """Laplacian comparison margins; saturation for constant-curvature models and a too-large-K control."""
    z, K, grid, dirs = _comparison_setup(model, params, rng)
    rep = cmp.laplacian_comparison_check(model, z, K, grid, dirs, steps=int(params.get("steps", 200)))
    good = [s for s in rep.samples if "error" not in s]
    out = [case("laplacian/ok", rep.verdicts["laplacian_ok"], 1, 0, "true")]
    tol = float(params.get("tolerance", 1e-4))
    if _saturates(model, params):
        out.append(case("laplacian/saturation", max(abs(s["margin"]) for s in good), 0, tol))
    out.append(case("laplacian/trace_cross_check", max(abs(s["delta_r"] - s["trace_check"]) for s in good), 0, 1e-4))
    factor = float(params.get("negative_control", 1.1))
    if K > 0 and factor > 1:
        neg = cmp.laplacian_comparison_check(model, z, K * factor, grid, dirs, steps=int(params.get("steps", 200)))
        out.append(case("laplacian/negative_control_fails", not neg.verdicts["laplacian_ok"], 1, 0, "true"))
    return out, {"K": K, "verdicts": rep.verdicts, "samples": rep.samples}


def volume(model: MetricModel, params: dict, rng: np.random.Generator) -> tuple[list[dict], dict]:
    """Volume density ratio: saturation, monotonicity and the small-radius limit."""
    z, K, grid, dirs = _comparison_setup(model, params, rng)
    rep = cmp.laplacian_comparison_check(model, z, K, grid, dirs, steps=int(params.get("steps", 200)))
    out = [case("volume/monotone", rep.verdicts["lambda_monotone"], 1, 0, "true"),
           case("volume/limit_one", rep.verdicts["lambda_limit_one"], 1, 0, "true")]
    tol = float(params.get("tolerance", 1e-4))
    if _saturates(model, params):
        out.append(case("volume/saturation", rep.verdicts["max_abs_lambda_minus_one"], 0, tol))
    if rep.verdicts["laplacian_ok"]:
        out.append(case("volume/monotone_given_laplacian", rep.verdicts["lambda_monotone"], 1, 0, "true"))
    return out, {"K": K, "verdicts": rep.verdicts, "samples": rep.samples}


RUNNERS = {
    "identities": identities,
    "thm11": thm11,
    "thm12": thm12,
    "myers": myers,
    "synge": synge,
    "laplacian": laplacian,
    "volume": volume,
}


def experiment_rng(seed: int, name: str) -> np.random.Generator:
    """Independent counter-based stream per experiment, so suites compose identically to single runs."""
    key = [int(seed), EXPERIMENTS.index(name)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def run_experiment(name: str, model: MetricModel, params: dict, seed: int) -> tuple[list[dict], dict]:
    rng = experiment_rng(seed, name)
    try:
        return RUNNERS[name](model, params or {}, rng)
    except GeometryError as exc:
        return [error_case(f"{name}/setup", exc)], {}

