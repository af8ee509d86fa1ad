"""Geodesics, parallel transport, parallel frames, Jacobi fields and shooting distances.

Curves are stored in real coordinates ``x = (Re z, Im z)`` with the node axis
second to last: ``x[..., k, :]`` is the position at ``t[k]``.  Every
integration is fixed-step RK4 and is vectorized over leading batch axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .chart import (
    MetricModel,
    as_point,
    check_domain,
    metric_partials,
    complexify,
    j_matrix,
    real_metric,
    to_complex,
    to_real,
)
from .connections import (
    _check_flavor,
    complex_jet,
    covariant_derivative,
    gamma_and_derivative,
    gamma_table,
)
from .curvature import curvature_from_gamma
from .errors import (
    BadSeedFrame,
    BeyondInjectivityBound,
    DomainExit,
    GridMismatch,
    NoConvergence,
    StepTooLarge,
    ZeroVector,
)
from .numerics import fd_derivative, rk4, uniform_grid

MAX_STEP_LENGTH = 0.05  # metric length covered by one RK4 step


def default_steps(length: float) -> int:
    return max(1000, math.ceil(abs(length) / 1e-3))


def _jet(model: MetricModel, x: np.ndarray, order: int = 1):
    return complex_jet(metric_partials(model, to_complex(x), order=order, check=False))


def _contract(gamma: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Real components of gamma(u, w) for real vectors u, w (w may carry an extra leading axis)."""
    ua, wa = complexify(u), complexify(w)
    gu = (ua[..., None, None, :] @ gamma)[..., 0, :]  # [..., C, B] = gamma^C_{AB} u^A
    if wa.ndim == ua.ndim:
        c = (gu @ wa[..., :, None])[..., 0]
    else:
        c = wa @ np.swapaxes(gu, -1, -2)
    n = u.shape[-1] // 2
    return to_real(c[..., :n])


def metric_at(model: MetricModel, x: np.ndarray) -> np.ndarray:
    return real_metric(np.asarray(model.h(to_complex(x)), dtype=complex))


def _inner(g: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("...a,...ab,...b->...", u, g, w)


@dataclass(eq=False)
class Curve:
    model: MetricModel
    t: np.ndarray  # (N+1,)
    x: np.ndarray  # (..., N+1, 2n)
    v: np.ndarray  # (..., N+1, 2n)
    geodesic_residual: float = math.nan
    sb_residual: float = math.nan
    path: Callable | None = None  # t -> (x, v); None means "re-integrate the geodesic ODE"

    @property
    def n(self) -> int:
        return self.x.shape[-1] // 2

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def points(self) -> np.ndarray:
        return to_complex(self.x)

    @property
    def velocities(self) -> np.ndarray:
        return self.v

    def metric(self) -> np.ndarray:
        return metric_at(self.model, self.x)

    def speed(self) -> np.ndarray:
        return np.sqrt(_inner(self.metric(), self.v, self.v))

    def speed_drift(self) -> float:
        s = self.speed()
        return float(np.max(np.abs(s - s[..., :1])))


@dataclass(eq=False)
class FieldAlongCurve:
    curve: Curve
    values: np.ndarray  # (..., N+1, 2n)
    derivative: np.ndarray | None = None  # coordinate d/dt of the components

    def __post_init__(self):
        if self.values.shape[-2] != len(self.curve.t):
            raise GridMismatch(f"field has {self.values.shape[-2]} samples, curve has {len(self.curve.t)}")

    def coordinate_derivative(self) -> np.ndarray:
        if self.derivative is not None:
            return self.derivative
        return fd_derivative(self.values, self.curve.dt, axis=-2)

    def covariant(self, flavor: str) -> np.ndarray:
        """Real components of the covariant t-derivative along the carrier curve."""
        gamma = gamma_table(_check_flavor(flavor), _jet(self.curve.model, self.curve.x))
        return covariant_derivative(gamma, self.curve.v, self.values, self.coordinate_derivative())


def covariant_acceleration(curve: Curve, flavor: str = "lc") -> np.ndarray:
    """|nabla_{gamma'} gamma'| at every node, from 4th-order differences of the sampled velocity."""
    gamma = gamma_table(_check_flavor(flavor), _jet(curve.model, curve.x))
    acc = covariant_derivative(gamma, curve.v, curve.v, fd_derivative(curve.v, curve.dt, axis=-2))
    return np.sqrt(np.maximum(_inner(curve.metric(), acc, acc), 0.0))


def _domain_guard(model: MetricModel, n: int, h, t0: float):
    def check(k, t, y):
        inside = model.contains(to_complex(y[..., : 2 * n]))
        if not np.all(inside):
            raise DomainExit(f"trajectory left the domain of {model.spec} at step {k}", float(np.min(t)))

    return check


def _geodesic_rhs(model: MetricModel, n: int):
    def rhs(t, y):
        x, v = y[..., : 2 * n], y[..., 2 * n:]
        gamma = gamma_table("lc", _jet(model, x))
        return np.concatenate([v, -_contract(gamma, v, v)], axis=-1)

    return rhs


def integrate_geodesic(model: MetricModel, p, v, length: float, steps: int | None = None,
                       a: float = 0.0, residuals: bool = True) -> Curve:
    """Geodesic t -> exp_p((t - a) v) on [a, a + length] by RK4."""
    z = as_point(model, p)
    check_domain(model, z)
    n = model.n
    v = np.asarray(v, dtype=float)
    x0 = np.broadcast_to(to_real(z), np.broadcast_shapes(z.shape[:-1] + (2 * n,), v.shape))
    v = np.broadcast_to(v, x0.shape)
    if np.any(np.linalg.norm(v, axis=-1) == 0):
        raise ZeroVector("initial velocity must be nonzero")
    steps = default_steps(length) if steps is None else int(steps)
    h = length / steps
    speed0 = np.sqrt(_inner(metric_at(model, x0), v, v))
    if np.max(abs(h) * speed0) > MAX_STEP_LENGTH:
        raise StepTooLarge(f"step covers {np.max(abs(h) * speed0):.3g} > {MAX_STEP_LENGTH} units of length")
    ys = rk4(_geodesic_rhs(model, n), np.concatenate([x0, v], axis=-1), h, steps, t0=a,
             after_step=_domain_guard(model, n, h, a))
    ys = np.moveaxis(ys, 0, -2)
    curve = Curve(model, uniform_grid(a, a + length, steps), ys[..., : 2 * n], ys[..., 2 * n:])
    if residuals:
        curve.geodesic_residual = float(np.max(covariant_acceleration(curve, "lc")))
        curve.sb_residual = float(np.max(covariant_acceleration(curve, "sb")))
    return curve


def curve_from_path(model: MetricModel, path: Callable, a: float, b: float, steps: int) -> Curve:
    """Carrier curve from ``path(t) -> (x, v)`` in real coordinates (not required to be a geodesic)."""
    t = uniform_grid(a, b, steps)
    x, v = path(t[:, None])
    return Curve(model, t, np.asarray(x, float), np.asarray(v, float), path=path)


def _co_integrate(curve: Curve, extra0: np.ndarray, extra_rhs: Callable, order: int = 1) -> np.ndarray:
    """Integrate extra' = extra_rhs(x, v, cj, extra) along the carrier; returns (..., N+1, *extra.shape[batch:])."""
    model, n = curve.model, curve.n
    batch = curve.x.shape[:-2]
    extra0 = np.asarray(extra0, dtype=float)
    tail = extra0.shape[len(batch):]
    size = int(np.prod(tail))
    h = curve.dt

    if curve.path is None:
        def rhs(t, y):
            x, v = y[..., : 2 * n], y[..., 2 * n: 4 * n]
            e = y[..., 4 * n:].reshape(batch + tail)
            cj = _jet(model, x, order)
            gamma = gamma_table("lc", cj)
            de = extra_rhs(x, v, cj, e)
            return np.concatenate([v, -_contract(gamma, v, v), de.reshape(batch + (size,))], axis=-1)

        y0 = np.concatenate([curve.x[..., 0, :], curve.v[..., 0, :], extra0.reshape(batch + (size,))], axis=-1)
        ys = rk4(rhs, y0, h, curve.steps, t0=curve.t[0], after_step=_domain_guard(model, n, h, curve.t[0]))
        ys = ys[..., 4 * n:]
    else:
        def rhs(t, y):
            x, v = curve.path(np.asarray(t, float))
            x = np.broadcast_to(x, batch + (2 * n,))
            v = np.broadcast_to(v, batch + (2 * n,))
            e = y.reshape(batch + tail)
            return extra_rhs(x, v, _jet(model, x, order), e).reshape(batch + (size,))

        ys = rk4(rhs, extra0.reshape(batch + (size,)), h, curve.steps, t0=curve.t[0])
    ys = np.moveaxis(ys, 0, len(batch))
    return ys.reshape(batch + (curve.steps + 1,) + tail)


@dataclass(eq=False)
class TransportOperator:
    flavor: str
    curve: Curve
    matrices: np.ndarray  # (..., N+1, 2n, 2n); column j is the image of d/dx^j

    def apply(self, v0) -> np.ndarray:
        """Transported values of v0 (batch shape of the curve, no time axis)."""
        v0 = np.asarray(v0, float)[..., None, :]
        return np.einsum("...kab,...kb->...ka", self.matrices, v0)

    def isometry_defect(self) -> float:
        g = self.curve.metric()
        m = self.matrices
        pulled = np.einsum("...kab,...kac,...kcd->...kbd", m, g, m)
        return float(np.max(np.abs(pulled - g[..., :1, :, :])))

    def j_commutation_defect(self) -> float:
        jm = j_matrix(self.curve.n)
        return float(np.max(np.abs(self.matrices @ jm - jm @ self.matrices)))


def transport_operator(flavor: str, curve: Curve) -> TransportOperator:
    flavor = _check_flavor(flavor)
    dim = 2 * curve.n
    batch = curve.x.shape[:-2]

    def rhs(x, v, cj, e):  # e: (..., 2n vectors, 2n components)
        return -_contract(gamma_table(flavor, cj), v, e)

    eye = np.broadcast_to(np.eye(dim), batch + (dim, dim))
    rows = _co_integrate(curve, eye, rhs)
    return TransportOperator(flavor, curve, np.swapaxes(rows, -1, -2))


def parallel_transport(flavor: str, model: MetricModel, curve: Curve, v0) -> tuple[FieldAlongCurve, TransportOperator]:
    if curve.model is not model:
        curve = Curve(model, curve.t, curve.x, curve.v, path=curve.path)
    op = transport_operator(flavor, curve)
    flavor = op.flavor
    values = op.apply(v0)
    gamma = gamma_table(flavor, _jet(model, curve.x))
    return FieldAlongCurve(curve, values, -_contract(gamma, curve.v, values)), op


def adapted_frame(g: np.ndarray, e1: np.ndarray) -> np.ndarray:
    """Orthonormal rows (e_1..e_n, Je_1..Je_n) with e_1 = e1/|e1|, by complex Gram-Schmidt."""
    dim = g.shape[-1]
    n = dim // 2
    jm = j_matrix(n)
    frame = np.zeros(np.broadcast_shapes(g.shape[:-2], e1.shape[:-1]) + (dim, dim))
    cands = [np.broadcast_to(e1, frame.shape[:-1])] + [np.broadcast_to(np.eye(dim)[k], frame.shape[:-1]) for k in range(dim)]
    filled = 0
    for c in cands:
        if filled == n:
            break
        w = np.array(c, dtype=float)
        for _ in range(2):  # re-orthogonalize once for stability
            for k in range(filled):
                for e in (frame[..., k, :], frame[..., k + n, :]):
                    w = w - _inner(g, w, e)[..., None] * e
        nrm = np.sqrt(np.maximum(_inner(g, w, w), 0.0))
        if np.min(nrm) < 1e-6:
            continue
        w = w / nrm[..., None]
        frame[..., filled, :] = w
        frame[..., filled + n, :] = w @ jm.T
        filled += 1
    return frame


def check_seed_frame(g: np.ndarray, frame: np.ndarray, tangent: np.ndarray | None, tol: float = 1e-8) -> None:
    n = frame.shape[-1] // 2
    gram = np.einsum("...ia,...ab,...jb->...ij", frame, g, frame)
    if np.max(np.abs(gram - np.eye(2 * n))) > tol:
        raise BadSeedFrame("seed frame is not orthonormal")
    jm = j_matrix(n)
    if np.max(np.abs(frame[..., :n, :] @ jm.T - frame[..., n:, :])) > tol:
        raise BadSeedFrame("seed frame does not satisfy J e_i = e_(i+n)")
    if tangent is not None:
        unit = tangent / np.sqrt(_inner(g, tangent, tangent))[..., None]
        if np.max(np.abs(frame[..., 0, :] - unit)) > tol:
            raise BadSeedFrame("first seed vector is not the unit tangent")


def parallel_frame(flavor: str, model: MetricModel, curve: Curve, seed: np.ndarray | None = None) -> list[FieldAlongCurve]:
    """Transport an adapted orthonormal frame (e_1 = unit tangent, e_(i+n) = J e_i) along the curve."""
    g0 = metric_at(model, curve.x[..., 0, :])
    if seed is None:
        seed = adapted_frame(g0, curve.v[..., 0, :])
    seed = np.asarray(seed, float)
    check_seed_frame(g0, seed, curve.v[..., 0, :])
    _, op = parallel_transport(flavor, model, curve, np.zeros(2 * model.n))
    frames = np.einsum("...kab,...ib->...kia", op.matrices, seed)
    gamma = gamma_table(op.flavor, _jet(model, curve.x))
    return [FieldAlongCurve(curve, frames[..., i, :], -_contract(gamma, curve.v, frames[..., i, :]))
            for i in range(2 * model.n)]


def frame_gram_defect(frame: list[FieldAlongCurve]) -> float:
    g = frame[0].curve.metric()
    vals = np.stack([f.values for f in frame], axis=-2)
    gram = np.einsum("...ia,...ab,...jb->...ij", vals, g, vals)
    return float(np.max(np.abs(gram - np.eye(len(frame)))))


def _jacobi_rhs(k_fields: int, dim: int):
    """Extra state: frame rows E (dim x dim), coefficients a and a' (k_fields x dim)."""

    def rhs(x, v, cj, state):
        e = state[..., :dim, :]
        a = state[..., dim: dim + k_fields, :]
        ap = state[..., dim + k_fields:, :]
        gamma, dgamma = gamma_and_derivative("lc", cj)
        r = curvature_from_gamma(gamma, dgamma, cj.g)
        va = complexify(v)
        # rv[..., A, D] = R(., v, v, .)
        rv = (va[..., None, None, None, :] @ np.moveaxis(r, -3, -2))[..., 0, :]
        rv = (va[..., None, None, :] @ rv)[..., 0, :]
        ea = complexify(e)
        m = np.swapaxes(ea @ rv @ np.swapaxes(ea, -1, -2), -1, -2).real  # M[i, j] = R(e_j, v, v, e_i)
        de = -_contract(gamma, v, e)
        dap = -np.einsum("...ij,...kj->...ki", m, a)
        return np.concatenate([de, ap, dap], axis=-2)

    return rhs


def _orthonormal_frame(model: MetricModel, x0: np.ndarray, v0: np.ndarray) -> np.ndarray:
    return adapted_frame(metric_at(model, x0), v0)


def jacobi_field(model: MetricModel, geodesic: Curve, J0, J0prime) -> FieldAlongCurve:
    """Solve nabla nabla J + R(J, g') g' = 0 (LC) with J(a) = J0, nabla J(a) = J0prime."""
    dim = 2 * model.n
    x0, v0 = geodesic.x[..., 0, :], geodesic.v[..., 0, :]
    g0 = metric_at(model, x0)
    e0 = _orthonormal_frame(model, x0, v0)
    J0 = np.broadcast_to(np.asarray(J0, float), v0.shape)
    J1 = np.broadcast_to(np.asarray(J0prime, float), v0.shape)
    a0 = np.einsum("...ia,...ab,...b->...i", e0, g0, J0)[..., None, :]
    a1 = np.einsum("...ia,...ab,...b->...i", e0, g0, J1)[..., None, :]
    traj = _co_integrate(geodesic, np.concatenate([e0, a0, a1], axis=-2), _jacobi_rhs(1, dim), order=2)
    e = traj[..., :dim, :]
    a = traj[..., dim, :]
    ap = traj[..., dim + 1, :]
    values = np.einsum("...i,...ia->...a", a, e)
    cov = np.einsum("...i,...ia->...a", ap, e)
    gamma = gamma_table("lc", _jet(model, geodesic.x))
    return FieldAlongCurve(geodesic, values, cov - _contract(gamma, geodesic.v, values))


def unit_direction(model: MetricModel, p, omega) -> np.ndarray:
    x = to_real(as_point(model, p))
    w = np.asarray(omega, float)
    nrm = np.sqrt(_inner(metric_at(model, x), w, w))
    if np.any(nrm == 0):
        raise ZeroVector("direction must be nonzero")
    return w / nrm[..., None]


def jacobi_volume_flow(model: MetricModel, p, omega, rho, steps: int = 200, extra_nodes: int = 0):
    """Normal Jacobi matrices A(t), A'(t) along exp_p(t omega) with per-batch step rho / (steps - extra_nodes).

    Returns ``(A, Ap)`` of shape ``(..., steps + 1, 2n-1, 2n-1)`` where node
    ``steps - extra_nodes`` sits at ``t = rho``.  Rows are fields J_i with
    J_i(0) = 0, nabla J_i(0) = e_i (e_i normal, orthonormal); columns are
    components in the LC-parallel frame.
    """
    z = as_point(model, p)
    check_domain(model, z)
    n = model.n
    dim = 2 * n
    w = unit_direction(model, z, omega)
    rho = np.asarray(rho, float)
    shape = np.broadcast_shapes(z.shape[:-1], w.shape[:-1], rho.shape)
    x0 = np.broadcast_to(to_real(z), shape + (dim,))
    w = np.broadcast_to(w, shape + (dim,))
    h = np.broadcast_to(rho, shape)[..., None] / (steps - extra_nodes)
    e0 = _orthonormal_frame(model, x0, w)
    k = dim - 1
    a0 = np.zeros(shape + (k, dim))
    a1 = np.zeros(shape + (k, dim))
    a1[..., np.arange(k), np.arange(1, dim)] = 1.0
    size = (dim + 2 * k) * dim
    rhs_extra = _jacobi_rhs(k, dim)

    def rhs(t, y):
        x, v = y[..., :dim], y[..., dim: 2 * dim]
        cj = _jet(model, x, 2)
        gamma = gamma_table("lc", cj)
        st = y[..., 2 * dim:].reshape(shape + (dim + 2 * k, dim))
        return np.concatenate([v, -_contract(gamma, v, v), rhs_extra(x, v, cj, st).reshape(shape + (size,))], axis=-1)

    y0 = np.concatenate([x0, w, np.concatenate([e0, a0, a1], axis=-2).reshape(shape + (size,))], axis=-1)
    ys = rk4(rhs, y0, h, steps, after_step=_domain_guard(model, n, h, 0.0))
    st = ys[..., 2 * dim:].reshape((steps + 1,) + shape + (dim + 2 * k, dim))
    st = np.moveaxis(st, 0, len(shape))
    A = st[..., dim: dim + k, 1:]
    Ap = st[..., dim + k:, 1:]
    return A, Ap


def exp_jacobian(model: MetricModel, p, rho, omega, steps: int = 200) -> np.ndarray:
    """(2n-1) x (2n-1) normal Jacobian of exp_p at rho*omega; det = rho^(2n-1) sqrt(det g) in normal coordinates."""
    A, _ = jacobi_volume_flow(model, p, omega, rho, steps)
    return A[..., -1, :, :]


@dataclass
class ShootResult:
    length: float
    direction: np.ndarray  # unit initial velocity (real components)
    endpoint_error: float
    within_bound: bool
    starts_converged: int = 0
    candidates: list = field(default_factory=list, repr=False)


def _endpoints(model: MetricModel, x0: np.ndarray, v: np.ndarray, steps: int, record: bool = False):
    """exp_p(v) for a batch of v; members that leave the domain are masked out instead of raising.

    With ``record=True`` the whole trajectory ``(steps + 1, ..., 2n)`` is
    returned together with a per-node alive mask.
    """
    n = model.n
    base = _geodesic_rhs(model, n)
    alive = np.ones(v.shape[:-1], dtype=bool)
    y0 = np.concatenate([np.broadcast_to(x0, v.shape), v], axis=-1)
    history = [alive.copy()]

    def rhs(t, y):
        # stage values may wander outside the domain; evaluate those at the start point
        bad = ~(model.contains(to_complex(y[..., : 2 * n])) & np.all(np.isfinite(y), axis=-1))
        if np.any(bad):
            y = np.where(bad[..., None], y0, y)
        out = base(t, y)
        out[bad | ~alive] = 0.0
        return out

    def guard(k, t, y):
        alive[...] &= model.contains(to_complex(y[..., : 2 * n])) & np.all(np.isfinite(y), axis=-1)
        y[~alive] = y0[~alive]  # park dead members at a safe state
        history.append(alive.copy())

    with np.errstate(all="ignore"):
        ys = rk4(rhs, y0, 1.0 / steps, steps, after_step=guard)
    if record:
        return ys[..., : 2 * n], np.stack(history)
    end = ys[-1][..., : 2 * n]
    return end, alive & np.all(np.isfinite(end), axis=-1)


def _start_directions(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Evenly spaced angles for n = 1, seeded Gaussian directions otherwise."""
    if n == 1:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    d = rng.normal(size=(count, 2 * n))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _scan_starts(model, xp, xq, gp, dirs, scan_length, steps):
    """Integrate each start direction once; seed at its first and at its global closest approach to q."""
    traj, alive = _endpoints(model, xp, scan_length * dirs, steps, record=True)
    dist = np.where(alive, np.linalg.norm(traj - xq, axis=-1), np.inf)
    dist[0] = np.inf
    glob = np.argmin(dist, axis=0)
    with np.errstate(invalid="ignore"):  # inf - inf after a start dies
        dec = np.diff(dist, axis=0) >= 0  # dist stops decreasing after node k
    first = np.where(dec.any(axis=0), np.argmax(dec, axis=0), glob)
    seeds = np.concatenate([first, glob])
    fracs = seeds / steps
    v = np.concatenate([dirs, dirs]) * (scan_length * fracs)[:, None]
    keep = fracs > 0
    _, uniq = np.unique(np.round(v[keep], 12), axis=0, return_index=True)
    return v[keep][np.sort(uniq)]


def _gauss_newton(model, xp, xq, v, tol, steps, max_iter):
    """Damped Gauss-Newton on exp_p(v) = q for a batch of starts.

    Each iteration costs two batched integrations: one for the endpoint and
    its forward-difference Jacobian, one for all damping factors at once.
    """
    dim = xp.shape[-1]
    eye = np.eye(dim)
    lams = 0.5 ** np.arange(8)
    for _ in range(max_iter):
        live = np.all(np.isfinite(v), axis=-1)
        eps = 1e-6 * (1 + np.linalg.norm(np.nan_to_num(v), axis=-1))
        vv = np.nan_to_num(v)
        batch = np.concatenate([vv[:, None, :], vv[:, None, :] + eps[:, None, None] * eye], axis=1)
        ends, ok = _endpoints(model, xp, batch, steps)
        res = np.where(ok[:, 0] & live, np.linalg.norm(ends[:, 0] - xq, axis=-1), np.inf)
        active = np.all(ok, axis=-1) & live & (res > tol)
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        jac = (ends[idx, 1:] - ends[idx, :1]) / eps[idx, None, None]  # [b, k, a] = d end_a / d v_k
        step = np.stack([np.linalg.lstsq(jac[b].T, xq - ends[i, 0], rcond=None)[0] for b, i in enumerate(idx)])
        cand = v[idx, None, :] + lams[None, :, None] * step[:, None, :]
        ce, cok = _endpoints(model, xp, cand, steps)
        cres = np.where(cok, np.linalg.norm(ce - xq, axis=-1), np.inf)
        pick = np.argmin(cres, axis=1)
        best = cres[np.arange(len(idx)), pick]
        improved = best < res[idx]
        v[idx[improved]] = cand[np.arange(len(idx)), pick][improved]
        v[idx[~improved]] = np.nan  # stalled starts are dropped
    else:
        ends, ok = _endpoints(model, xp, np.nan_to_num(v), steps)
        res = np.where(ok & np.all(np.isfinite(v), axis=-1), np.linalg.norm(ends - xq, axis=-1), np.inf)
    return v, res


def distance_shoot(model: MetricModel, p, q, max_length: float | None = None, starts: int = 16,
                   rng: np.random.Generator | None = None, beyond_bound: str = "raise",
                   steps: int = 200, max_iter: int = 30) -> ShootResult:
    """Shortest geodesic found from p to q by multi-start damped Gauss-Newton shooting.

    Starts are the straight chart line and ``starts`` directions, each seeded
    at its closest approach to q along a scan geodesic.  Minimality is only
    claimed up to ``model.injectivity_bound``: beyond it the call raises
    ``BeyondInjectivityBound`` (``beyond_bound="raise"``) or returns with
    ``within_bound=False`` (``beyond_bound="flag"``).
    """
    zp, zq = as_point(model, p), as_point(model, q)
    check_domain(model, zp)
    check_domain(model, zq)
    rng = rng if rng is not None else np.random.default_rng(0)
    xp, xq = to_real(zp), to_real(zq)
    tol = 1e-8 * (1 + np.linalg.norm(zq))
    gp = metric_at(model, xp)
    if np.linalg.norm(xq - xp) == 0:
        return ShootResult(0.0, np.zeros_like(xp), 0.0, True)
    guess = xq - xp
    glen = math.sqrt(_inner(gp, guess, guess))
    dirs = np.concatenate([guess[None, :], _start_directions(model.n, starts, rng)], axis=0)
    dirs = dirs / np.sqrt(_inner(gp, dirs, dirs))[:, None]
    scan_length = max_length if max_length is not None else 3.0 * glen
    scan_steps = max(steps, int(math.ceil(steps * scan_length / max(glen, 1e-12))))
    v = np.concatenate([guess[None, :], _scan_starts(model, xp, xq, gp, dirs, scan_length, scan_steps)], axis=0)
    v, res = _gauss_newton(model, xp, xq, v, tol, steps, max_iter)
    lengths = np.sqrt(np.abs(_inner(gp, v, v)))
    good = np.isfinite(res) & (res <= tol) & np.all(np.isfinite(v), axis=-1)
    if max_length is not None:
        good &= lengths <= max_length
    if not np.any(good):
        raise NoConvergence(f"shooting from {zp} to {zq} did not converge (best residual {np.nanmin(res):.3g})")
    best = np.flatnonzero(good)[np.argmin(lengths[good])]
    length = float(lengths[best])
    within = length <= model.injectivity_bound
    if not within and beyond_bound == "raise":
        raise BeyondInjectivityBound(
            f"connection of length {length:.6g} exceeds the injectivity bound {model.injectivity_bound:.6g}; "
            "global minimality is not claimed")
    cands = sorted(float(x) for x in lengths[good])
    return ShootResult(length, v[best] / length, float(res[best]), bool(within), int(good.sum()), cands)
