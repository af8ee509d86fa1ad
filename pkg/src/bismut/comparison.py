"""Model-space functions, Laplacian and volume comparison, and the Myers/Synge diameter experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .chart import MetricModel, as_point, to_complex, to_real
from .curvature import curvature, hsc_from_field, ricci_complexified_from_field, ricci_matrix
from .errors import (
    BeyondInjectivityBound,
    ConjugatePoint,
    GeometryError,
    InconclusiveK,
    NoConvergence,
    PoleError,
)
from .geodesy import (
    _inner,
    distance_shoot,
    integrate_geodesic,
    jacobi_volume_flow,
    metric_at,
    parallel_frame,
    unit_direction,
)
from .numerics import five_point
from .variational import index_form, myers_fields, myers_integral, synge_field

LAPLACIAN_TOL = 1e-4
MONOTONE_SLACK = 1e-5


def sn_k(K: float, t):
    """(sn_K(t), sn_K'(t)) for the solution of f'' + K f = 0, f(0) = 0, f'(0) = 1."""
    t = np.asarray(t, dtype=float)
    if K > 0:
        r = math.sqrt(K)
        return np.sin(r * t) / r, np.cos(r * t)
    if K < 0:
        r = math.sqrt(-K)
        return np.sinh(r * t) / r, np.cosh(r * t)
    return t.copy(), np.ones_like(t)


@dataclass(frozen=True)
class ModelSpace:
    K: float

    def sn(self, t):
        return sn_k(self.K, t)[0]

    def dsn(self, t):
        return sn_k(self.K, t)[1]

    def ratio(self, t):
        """sn'/sn; raises PoleError where sn vanishes."""
        s, ds = sn_k(self.K, t)
        if np.any(np.abs(s) <= 1e-14):
            raise PoleError(f"sn_{self.K} vanishes at a requested t")
        return ds / s

    def laplacian_bound(self, n: int, t):
        return (2 * n - 1) * self.ratio(t)


def default_directions(n: int, count: int | None = None) -> np.ndarray:
    """Direction grid in T_pM (real components, Euclidean-unit; metric normalization happens later).

    n = 1: equally spaced angles.  n >= 2: unscrambled Sobol points mapped
    through the normal quantile and normalized.
    """
    if n == 1:
        count = count or 32
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    count = count or 128
    # the first two unscrambled points (0 and the all-1/2 point) map to degenerate vectors
    m = math.ceil(math.log2(count + 2))
    pts = qmc.Sobol(d=2 * n, scramble=False).random_base2(m)[2: count + 2]
    d = _normal.ppf(pts)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _volume_stencil(model: MetricModel, p, omega, rho, steps: int, k: int):
    """log det A at rho + (-2, -1, 0, 1, 2) delta, the node spacing delta, and tr(A' A^-1) at rho."""
    A, Ap = jacobi_volume_flow(model, p, omega, rho, steps=steps, extra_nodes=2 * k)
    idx = steps - 2 * k + k * np.arange(-2, 3)
    dets = np.linalg.det(A[..., idx, :, :])
    if np.any(dets <= 0):
        raise ConjugatePoint("normal Jacobian determinant is not positive")
    delta = k * np.asarray(rho, float) / (steps - 2 * k)
    mid = steps - 2 * k
    trace = np.trace(Ap[..., mid, :, :] @ np.linalg.inv(A[..., mid, :, :]), axis1=-2, axis2=-1)
    return np.moveaxis(np.log(dets), -1, 0), delta, trace, dets[..., 2]


def _check_bound(model: MetricModel, rho) -> None:
    if np.max(rho) >= model.injectivity_bound:
        raise BeyondInjectivityBound(f"rho = {np.max(rho):.6g} is not below the injectivity bound "
                                     f"{model.injectivity_bound:.6g} of {model.spec}")


class VolumeSample(dict):
    """One (rho, direction) record; a dict so reports serialize directly."""


def laplacian_distance(model: MetricModel, p, omega, rho, steps: int = 200, k: int = 1, details: bool = False):
    """Delta r at exp_p(rho omega) as the rho-derivative of log det of the normal Jacobian (5-point stencil)."""
    rho = np.asarray(rho, float)
    _check_bound(model, rho)
    logs, delta, trace, det = _volume_stencil(model, p, omega, rho, steps, k)
    lap = five_point(logs, 1.0) / delta
    if details:
        return lap, trace, det
    return lap


def volume_density(model: MetricModel, p, rho, omega, K: float, steps: int = 200):
    """lambda = det A(rho) / sn_K(rho)^(2n-1), with det A = rho^(2n-1) sqrt(det g) in normal coordinates."""
    rho = np.asarray(rho, float)
    _check_bound(model, rho)
    A, _ = jacobi_volume_flow(model, p, omega, rho, steps=steps)
    det = np.linalg.det(A[..., -1, :, :])
    if np.any(det <= 0):
        raise ConjugatePoint("normal Jacobian determinant is not positive")
    return det / sn_k(K, rho)[0] ** (2 * model.n - 1)


@dataclass
class ComparisonReport:
    K: float
    samples: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"K": self.K, "samples": self.samples, "verdicts": self.verdicts}


def laplacian_comparison_check(model: MetricModel, p, K: float, rho_grid, directions=None,
                               steps: int = 200, k: int = 1) -> ComparisonReport:
    """Margins (2n-1) sn'_K/sn_K - Delta r and volume ratios on a (rho, direction) grid."""
    z = as_point(model, p)
    n = model.n
    rho_grid = np.asarray(rho_grid, float)
    dirs = default_directions(n) if directions is None else np.asarray(directions, float)
    space = ModelSpace(K)
    bound = space.laplacian_bound(n, rho_grid)
    report = ComparisonReport(float(K))
    rows = []
    try:
        lap, trace, det = laplacian_distance(model, z, dirs[:, None, :], rho_grid[None, :], steps, k, details=True)
        per_dir = [(lap[i], trace[i], det[i], None) for i in range(len(dirs))]
    except GeometryError:
        per_dir = []
        for d in dirs:
            try:
                lap, trace, det = laplacian_distance(model, z, d[None, :], rho_grid, steps, k, details=True)
                per_dir.append((lap, trace, det, None))
            except GeometryError as exc:
                per_dir.append((None, None, None, f"{type(exc).__name__}: {exc}"))
    try:
        lam0 = volume_density(model, z, 1e-2, dirs, K, steps=50)
    except GeometryError:
        lam0 = np.full(len(dirs), np.nan)
    snp = space.sn(rho_grid) ** (2 * n - 1)
    for i, (lap, trace, det, err) in enumerate(per_dir):
        for j, rho in enumerate(rho_grid):
            rec = VolumeSample(rho=float(rho), direction=[float(c) for c in dirs[i]])
            if err is not None:
                rec.update(error=err)
            else:
                lam = float(det[j] / snp[j])
                rec.update(delta_r=float(lap[j]), trace_check=float(trace[j]), bound=float(bound[j]),
                           margin=float(bound[j] - lap[j]), **{"lambda": lam})
            rows.append(rec)
    report.samples = rows
    good = [r for r in rows if "error" not in r]
    laplacian_ok = bool(good) and all(r["margin"] >= -LAPLACIAN_TOL for r in good)
    monotone = True
    for i in range(len(dirs)):
        lams = [r["lambda"] for r in rows[i * len(rho_grid):(i + 1) * len(rho_grid)] if "error" not in r]
        if any(b > a + MONOTONE_SLACK for a, b in zip(lams, lams[1:])):
            monotone = False
    report.verdicts = {
        "laplacian_ok": laplacian_ok,
        "lambda_monotone": bool(monotone),
        "lambda_limit_one": bool(np.all(np.abs(lam0 - 1) <= 1e-3)),
        "errors": len(rows) - len(good),
        "min_margin": float(min((r["margin"] for r in good), default=math.nan)),
        "max_abs_lambda_minus_one": float(max((abs(r["lambda"] - 1) for r in good), default=math.nan)),
    }
    return report


@dataclass
class KEstimate:
    value: float
    source: str
    samples: int
    argmin: list
    ricci_min: float
    hol_ricci_min: float
    hsc_min: float


def estimate_K(model: MetricModel, rng: np.random.Generator, samples: int = 64, source: str = "ricci") -> KEstimate:
    """Sampled lower curvature constant: min Ric^SB(X,X)/((2n-1)|X|^2) or min HSC^SB.

    This is an estimate over a finite sample, never a certified global bound.
    """
    n = model.n
    pts = model.sample_points(rng, samples)
    x = rng.normal(size=(samples, 2 * n))
    x = x / np.sqrt(_inner(metric_at(model, to_real(pts)), x, x))[:, None]
    fld = curvature("sb", model, pts)
    ric = np.real(ricci_complexified_from_field(fld, x, x)) / (2 * n - 1)
    u = to_complex(x)
    hol = np.real(np.einsum("...jk,...j,...k->...", ricci_matrix(fld), u.conj(), u)) / np.sum(np.abs(u) ** 2, -1)
    hsc = hsc_from_field(fld, x)
    vals = {"ricci": ric, "hsc": hsc}[source]
    i = int(np.argmin(vals))
    est = KEstimate(float(vals[i]), source, samples, [[float(c.real), float(c.imag)] for c in pts[i]],
                    float(ric.min()), float(hol.min()), float(hsc.min()))
    if not np.isfinite(est.value) or est.value <= 0:
        raise InconclusiveK(f"sampled {source} minimum {est.value:.6g} does not give a positive constant")
    return est


def _sample_geodesic(model: MetricModel, rng: np.random.Generator, length: float, steps: int, tries: int = 20):
    """A seeded unit-speed geodesic of the given length that stays well inside the chart."""
    for _ in range(tries):
        p = model.sample_points(rng, 1)[0]
        d = unit_direction(model, p, rng.normal(size=2 * model.n))
        try:
            c = integrate_geodesic(model, p, d, length, steps=steps)
        except GeometryError:
            continue
        if np.max(np.abs(c.points)) < 10 and c.geodesic_residual < 1e-6:
            return c
    raise NoConvergence(f"no usable geodesic of length {length} found on {model.spec}")


def _sin_profile(span: float, a: float = 0.0):
    w = math.pi / span
    return (lambda t: np.sin(w * (t - a))), (lambda t: w * np.cos(w * (t - a)))


def diameter_estimate(model: MetricModel, p, ring: float = 0.01, angles: int = 3, starts: int = 32,
                      steps: int = 100) -> dict:
    """Max over targets near the antipode of the shortest shooting distance.

    Targets sit on the inner half of a small chart ring around the
    antipodal image ``a`` (q = a (1 - ring e^{i theta}), |theta| <= pi/2),
    so their short connections stay inside the chart.
    """
    if model.antipode is None:
        raise NoConvergence(f"{model.spec} has no known antipode map")
    z = as_point(model, p)
    a = model.antipode(z)
    thetas = np.linspace(-np.pi / 2, np.pi / 2, angles)
    dists = []
    for th in thetas:
        q = a * (1 - ring * np.exp(1j * th))
        res = distance_shoot(model, z, q, beyond_bound="flag", starts=starts, steps=steps)
        dists.append(res.length)
    return {"estimate": float(max(dists)), "distances": [float(d) for d in dists], "ring": ring}


def myers_diameter_experiment(model: MetricModel, K: float | None = None, config: dict | None = None) -> dict:
    """Negative second variation of the Myers/Synge test fields at L slightly above pi/sqrt(K), plus a diameter estimate."""
    cfg = {"geodesics": 2, "stretch": 1.05, "steps": 400, "seed": 0, "k_source": "ricci",
           "k_samples": 64, "diameter": True, "diameter_point": [0.5, 0.0]}
    cfg.update(config or {})
    rng = np.random.default_rng(cfg["seed"])
    out: dict = {"model": model.spec}
    if K is None:
        try:
            est = estimate_K(model, rng, cfg["k_samples"], cfg["k_source"])
        except InconclusiveK as exc:
            return {**out, "status": "not_applicable", "reason": str(exc)}
        K = est.value
        out["K_estimate"] = est.__dict__
    if K <= 0:
        return {**out, "status": "not_applicable", "reason": "no positive curvature constant"}
    out["K"] = float(K)
    L = cfg["stretch"] * math.pi / math.sqrt(K)
    out["length"] = L
    cases = []
    for _ in range(cfg["geodesics"]):
        c = _sample_geodesic(model, rng, L, cfg["steps"])
        f, df = _sin_profile(L)
        frame = parallel_frame("sb", model, c)
        fields = myers_fields(c, frame, f, df)
        myers_sum = sum(index_form(model, c, v, v).value_sb_bulk for v in fields)
        closed = myers_integral(model, c, f, df)
        s = synge_field(model, c)
        synge = index_form(model, c, s, s).value_sb_bulk
        cases.append({"start": [float(v) for v in c.x[0]], "myers_sum": myers_sum, "myers_integral": closed,
                      "myers_gap": abs(myers_sum - closed), "synge": synge})
    out["cases"] = cases
    out["myers_negative"] = all(cs["myers_sum"] < 0 for cs in cases)
    out["synge_negative"] = all(cs["synge"] < 0 for cs in cases)
    if cfg["diameter"] and model.antipode is not None:
        p = np.asarray(cfg["diameter_point"], float)
        p = p[: model.n] + 1j * p[model.n: 2 * model.n] if p.size == 2 * model.n else p.astype(complex)
        d = diameter_estimate(model, p)
        d["bound"] = math.pi / math.sqrt(K)
        d["within_bound"] = d["estimate"] <= d["bound"] * 1.005
        out["diameter"] = d
    out["status"] = "ok"
    return out
