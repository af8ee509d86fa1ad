"""Energy, first and second variation, index forms and the Myers/Synge test fields.

Fields along a curve are sampled on the curve's uniform grid; covariant
t-derivatives use supplied coordinate derivatives when available and
4th-order differences otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .chart import MetricModel, j_matrix, to_complex
from .connections import gamma_table, torsion_sb
from .curvature import curvature
from .errors import GridMismatch, NotProper
from .geodesy import (
    Curve,
    FieldAlongCurve,
    _contract,
    _domain_guard,
    _geodesic_rhs,
    _inner,
    _jet,
    metric_at,
)
from .numerics import fd_derivative, rk4, simpson

EXP_STEPS = 16


def energy(model: MetricModel, curve: Curve) -> float:
    """E = 1/2 int |gamma'|^2 dt by composite Simpson on the curve grid."""
    speed2 = _inner(metric_at(model, curve.x), curve.v, curve.v)
    return 0.5 * simpson(speed2, curve.dt, axis=-1)


def _energy_of_samples(model: MetricModel, x: np.ndarray, dt: float) -> np.ndarray:
    v = fd_derivative(x, dt, axis=-2)
    return 0.5 * simpson(_inner(metric_at(model, x), v, v), dt, axis=-1)


def exp_map(model: MetricModel, x: np.ndarray, w: np.ndarray, steps: int = EXP_STEPS) -> np.ndarray:
    """Batched exp_x(w) in real coordinates (RK4 on [0, 1])."""
    n = model.n
    x, w = np.broadcast_arrays(np.asarray(x, float), np.asarray(w, float))
    h = 1.0 / steps
    ys = rk4(_geodesic_rhs(model, n), np.concatenate([x, w], axis=-1), h, steps,
             after_step=_domain_guard(model, n, h, 0.0))
    return ys[-1][..., : 2 * n]


def _values(field) -> np.ndarray:
    return field.values if isinstance(field, FieldAlongCurve) else np.asarray(field, float)


def _check_grid(curve: Curve, *fields) -> None:
    for f in fields:
        if f is not None and _values(f).shape[-2] != len(curve.t):
            raise GridMismatch(f"field has {_values(f).shape[-2]} samples, curve has {len(curve.t)}")


def is_proper(field, tol: float = 1e-10) -> bool:
    v = _values(field)
    return bool(np.max(np.abs(v[..., 0, :])) <= tol and np.max(np.abs(v[..., -1, :])) <= tol)


@dataclass(eq=False)
class VariationSurface:
    """A two-parameter variation alpha(t, s1, s2) of a base curve.

    ``linear_fields``: alpha = exp_{gamma(t)}(s1 V(t) + s2 W(t)), proper only.
    ``closed_form``: ``alpha(t, s1, s2)`` supplied by the caller, returning
    real coordinates with shape ``t.shape + (2n,)``.
    """

    base: Curve
    mode: str
    V: FieldAlongCurve | None = None
    W: FieldAlongCurve | None = None
    alpha: Callable | None = None
    proper: bool = True
    exp_steps: int = EXP_STEPS

    def __post_init__(self):
        if self.mode not in ("linear_fields", "closed_form"):
            raise ValueError(f"unknown surface mode {self.mode!r}")
        if self.mode == "linear_fields":
            _check_grid(self.base, self.V, self.W)
            if not (is_proper(self.V) and is_proper(self.W)):
                raise NotProper("linear_fields surfaces must vanish at both endpoints")
            self.proper = True
        elif self.alpha is None:
            raise ValueError("closed_form surfaces need an alpha(t, s1, s2) evaluator")

    def evaluate(self, s1, s2) -> np.ndarray:
        """Samples on the base grid for arrays of (s1, s2): shape s.shape + (N+1, 2n)."""
        s1, s2 = np.broadcast_arrays(np.asarray(s1, float), np.asarray(s2, float))
        if self.mode == "linear_fields":
            w = s1[..., None, None] * _values(self.V) + s2[..., None, None] * _values(self.W)
            x = np.broadcast_to(self.base.x, w.shape)
            return exp_map(self.base.model, x, w, self.exp_steps)
        t = self.base.t
        out = [np.asarray(self.alpha(t, a, b), float) for a, b in zip(s1.ravel(), s2.ravel())]
        return np.stack(out).reshape(s1.shape + out[0].shape)

    def energy(self, s1, s2) -> np.ndarray:
        return _energy_of_samples(self.base.model, self.evaluate(s1, s2), self.base.dt)


def mixed_partial_energy_fd(model: MetricModel, surface: VariationSurface, delta: float = 1e-3) -> float:
    """[E(d,d) - E(d,-d) - E(-d,d) + E(-d,-d)] / (4 d^2)."""
    s1 = np.array([delta, delta, -delta, -delta])
    s2 = np.array([delta, -delta, delta, -delta])
    e = surface.energy(s1, s2)
    return float((e[0] - e[1] - e[2] + e[3]) / (4 * delta * delta))


def boundary_term(model: MetricModel, surface: VariationSurface, delta: float = 1e-3) -> float:
    """<SB-nabla_{s1} alpha_{s2}, gamma'> evaluated at b minus at a (zero for proper surfaces)."""
    if surface.proper:
        return 0.0
    if surface.mode != "closed_form":
        raise NotProper("the non-proper boundary term needs a closed_form surface")
    d = delta
    grid = np.array([[d, d], [d, -d], [-d, d], [-d, -d], [d, 0], [-d, 0], [0, d], [0, -d]])
    x = surface.evaluate(grid[:, 0], grid[:, 1])[..., [0, -1], :]  # endpoints only
    mixed = (x[0] - x[1] - x[2] + x[3]) / (4 * d * d)
    a1 = (x[4] - x[5]) / (2 * d)
    a2 = (x[6] - x[7]) / (2 * d)
    ends = surface.base.x[..., [0, -1], :]
    vel = surface.base.v[..., [0, -1], :]
    gamma = gamma_table("sb", _jet(model, ends))
    cov = mixed + _contract(gamma, a1, a2)
    vals = _inner(metric_at(model, ends), cov, vel)
    return float(vals[..., 1] - vals[..., 0])


def first_variation_residual(model: MetricModel, geodesic: Curve, V, delta: float = 1e-4) -> float:
    """|dE/ds| at s = 0 for alpha = exp(s V), by central difference."""
    if not is_proper(V):
        raise NotProper("first variation check needs V(a) = V(b) = 0")
    w = _values(V)
    x = exp_map(model, np.broadcast_to(geodesic.x, (2,) + geodesic.x.shape),
                np.stack([delta * w, -delta * w]))
    e = _energy_of_samples(model, x, geodesic.dt)
    return float(abs(e[0] - e[1]) / (2 * delta))


class _Along(NamedTuple):
    g: np.ndarray
    gamma_lc: np.ndarray
    gamma_sb: np.ndarray


def _along(model: MetricModel, curve: Curve) -> _Along:
    cj = _jet(model, curve.x)
    return _Along(metric_at(model, curve.x), gamma_table("lc", cj), gamma_table("sb", cj))


def _cov(gamma, curve: Curve, field, deriv) -> np.ndarray:
    vals = _values(field)
    if deriv is None:
        deriv = field.derivative if isinstance(field, FieldAlongCurve) and field.derivative is not None \
            else fd_derivative(vals, curve.dt, axis=-2)
    return np.asarray(deriv, float) + _contract(gamma, curve.v, vals)


def _sb_integrand(model: MetricModel, geodesic: Curve, V, W, dV=None, dW=None, along=None) -> np.ndarray:
    along = along or _along(model, geodesic)
    z = to_complex(geodesic.x)
    v, w, u = _values(V), _values(W), geodesic.v
    vp = _cov(along.gamma_sb, geodesic, V, dV)
    wp = _cov(along.gamma_sb, geodesic, W, dW)
    tors = torsion_sb(model, z)
    rsb = curvature("sb", model, z)
    return _inner(along.g, vp, wp) + tors(v, u, wp) - rsb(v, u, u, w)


def second_variation_sb(model: MetricModel, geodesic: Curve, V, W, dV=None, dW=None) -> float:
    """int <V', W'> + T(V, g', W') - R(V, g', g', W) dt with SB covariant derivatives (proper case)."""
    _check_grid(geodesic, V, W)
    return float(simpson(_sb_integrand(model, geodesic, V, W, dV, dW), geodesic.dt, axis=-1))


class IndexFormResult(NamedTuple):
    value_lc: float
    value_sb_bulk: float
    boundary_term: float

    @property
    def reconciliation(self) -> float:
        return abs(self.value_lc - (self.value_sb_bulk + self.boundary_term))


def index_form(model: MetricModel, geodesic: Curve, V, W, dV=None, dW=None) -> IndexFormResult:
    """LC index form, SB bulk integral and the boundary term 1/2 T(V, W, g') at b minus at a."""
    _check_grid(geodesic, V, W)
    along = _along(model, geodesic)
    z = to_complex(geodesic.x)
    v, w, u = _values(V), _values(W), geodesic.v
    vp = _cov(along.gamma_lc, geodesic, V, dV)
    wp = _cov(along.gamma_lc, geodesic, W, dW)
    rlc = curvature("lc", model, z)
    lc = _inner(along.g, vp, wp) - rlc(v, u, u, w)
    sb = _sb_integrand(model, geodesic, V, W, dV, dW, along)
    ends = torsion_sb(model, z[..., [0, -1], :])
    tvals = 0.5 * ends(v[..., [0, -1], :], w[..., [0, -1], :], u[..., [0, -1], :])
    return IndexFormResult(float(simpson(lc, geodesic.dt, axis=-1)), float(simpson(sb, geodesic.dt, axis=-1)),
                           float(tvals[..., 1] - tvals[..., 0]))


def trig_field(curve: Curve, sin_coeffs, cos_coeffs=None) -> FieldAlongCurve:
    """V(t) = sum_k s_k sin(k pi u) + c_k cos(k pi u), u = (t - a)/(b - a), k = 1.. in coordinate components."""
    t = curve.t
    span = t[-1] - t[0]
    u = (t - t[0]) / span
    sc = np.atleast_2d(np.asarray(sin_coeffs, float))
    k = np.arange(1, sc.shape[0] + 1)
    arg = np.pi * np.outer(u, k)  # (N+1, K)
    vals = np.sin(arg) @ sc
    der = (np.cos(arg) * (np.pi * k / span)) @ sc
    if cos_coeffs is not None:
        cc = np.atleast_2d(np.asarray(cos_coeffs, float))
        kc = np.arange(1, cc.shape[0] + 1)
        argc = np.pi * np.outer(u, kc)
        vals = vals + np.cos(argc) @ cc
        der = der - (np.sin(argc) * (np.pi * kc / span)) @ cc
    return FieldAlongCurve(curve, vals, der)


def random_trig_field(curve: Curve, rng: np.random.Generator, modes: int = 3, scale: float = 0.3,
                      proper: bool = True) -> FieldAlongCurve:
    dim = curve.x.shape[-1]
    sin_c = scale * rng.normal(size=(modes, dim)) / np.arange(1, modes + 1)[:, None]
    cos_c = None if proper else scale * rng.normal(size=(modes, dim)) / np.arange(1, modes + 1)[:, None]
    return trig_field(curve, sin_c, cos_c)


def myers_fields(geodesic: Curve, frame: list[FieldAlongCurve], f: Callable, df: Callable) -> list[FieldAlongCurve]:
    """V_j = f(t) e_j(t) for j = 2..2n (the frame's first vector is the unit tangent)."""
    t = geodesic.t
    ft, dft = f(t)[:, None], df(t)[:, None]
    out = []
    for e in frame[1:]:
        de = e.coordinate_derivative()
        out.append(FieldAlongCurve(geodesic, ft * e.values, dft * e.values + ft * de))
    return out


def synge_field(model: MetricModel, geodesic: Curve) -> FieldAlongCurve:
    """sin(pi (t - a)/L) J gamma' with its exact coordinate derivative."""
    t = geodesic.t
    span = t[-1] - t[0]
    jm = j_matrix(model.n)
    u = geodesic.v
    acc = -_contract(gamma_table("lc", _jet(model, geodesic.x)), u, u)
    s = np.sin(np.pi * (t - t[0]) / span)[:, None]
    c = (np.pi / span) * np.cos(np.pi * (t - t[0]) / span)[:, None]
    return FieldAlongCurve(geodesic, s * (u @ jm.T), c * (u @ jm.T) + s * (acc @ jm.T))


def sb_parallel_residual(model: MetricModel, field: FieldAlongCurve) -> float:
    """max |SB-nabla_t V| (metric norm) along the carrier."""
    cov = field.covariant("sb")
    return float(np.max(np.sqrt(np.maximum(_inner(metric_at(model, field.curve.x), cov, cov), 0.0))))


def myers_integral(model: MetricModel, geodesic: Curve, f: Callable, df: Callable) -> float:
    """int (2n-1) f'^2 - f^2 Ric^SB(g', g') dt."""
    from .curvature import ricci_complexified_from_field

    t = geodesic.t
    field = curvature("sb", model, to_complex(geodesic.x))
    ric = np.real(ricci_complexified_from_field(field, geodesic.v, geodesic.v))
    integrand = (2 * model.n - 1) * df(t) ** 2 - f(t) ** 2 * ric
    return float(simpson(integrand, geodesic.dt, axis=-1))
