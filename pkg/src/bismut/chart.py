"""Single-chart Hermitian manifolds.

Real coordinates are ordered ``(x^1..x^n, x^{n+1}..x^{2n})`` with
``z^i = x^i + sqrt(-1) x^{i+n}``.  Complex frame components of a vector are
ordered ``(V^1..V^n, V^{1bar}..V^{nbar})`` in the basis
``{d/dz^i, d/dzbar^i}``.

Normalization: ``g(d/dz^i, d/dzbar^j) = h_{i jbar}``, hence
``g(d/dx^i, d/dx^j) = 2 Re h_{i jbar}``.  Every real-vector length in the
package carries this factor (the flat metric h = 1 gives |d/dx|^2 = 2).

All evaluators broadcast over leading batch axes: a point array of shape
``(..., n)`` yields tables of shape ``(..., <table dims>)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

import numpy as np

from .errors import DomainError, SelfTestError, SingularMetric

FD_STEP_SECOND = 1e-4


def to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def complexify(x: np.ndarray) -> np.ndarray:
    """Real components -> complex frame components ``(V, conj V)``."""
    u = to_complex(x)
    return np.concatenate([u, u.conj()], axis=-1)


def realify(va: np.ndarray) -> np.ndarray:
    """Complex frame components of a real vector -> real components."""
    va = np.asarray(va)
    n = va.shape[-1] // 2
    return to_real(va[..., :n])


def basis_matrix(n: int) -> np.ndarray:
    """Columns are the complex frame components of d/dx^a (a = 1..2n)."""
    eye = np.eye(n)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]])


def j_matrix(n: int) -> np.ndarray:
    """Real matrix of J: d/dx^i -> d/dx^{i+n}, d/dx^{i+n} -> -d/dx^i."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def conj_index(a: int, n: int) -> int:
    """Barred <-> unbarred on the complex index set {0..2n-1}."""
    return (a + n) % (2 * n)


def index_label(a: int, n: int) -> str:
    return f"{a + 1}" if a < n else f"{a - n + 1}b"


@dataclass(frozen=True)
class TangentVector:
    """A real tangent vector with its (1,0) and (0,1) views."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))

    @classmethod
    def from_v10(cls, v10) -> "TangentVector":
        return cls(to_real(v10))

    @property
    def n(self) -> int:
        return self.x.shape[-1] // 2

    @property
    def v10(self) -> np.ndarray:
        return to_complex(self.x)

    @property
    def v01(self) -> np.ndarray:
        return self.v10.conj()

    def __array__(self, dtype=None, copy=None):
        return self.x if dtype is None else self.x.astype(dtype)


class MetricJet(NamedTuple):
    h: np.ndarray
    dh: np.ndarray  # [..., k, i, j] = d h_{i jbar} / d z^k
    dbh: np.ndarray  # [..., k, i, j] = d h_{i jbar} / d zbar^k
    dzz: np.ndarray | None = None  # [..., k, l, i, j] = d^2 h / dz^k dz^l
    dzzb: np.ndarray | None = None  # [..., k, l, i, j] = d^2 h / dz^k dzbar^l


class MetricEval(NamedTuple):
    h: np.ndarray
    g_real: np.ndarray
    h_inv: np.ndarray


class Pairing(NamedTuple):
    g_real_val: float
    g_bilinear: complex
    norm2: float


def _everywhere(z):
    return np.ones(np.shape(z)[:-1], dtype=bool)


@dataclass(frozen=True, eq=False)
class MetricModel:
    """A Hermitian metric on a domain of C^n given by formulas.

    ``h(z)`` must broadcast over leading axes of ``z``.  ``dh(z)`` returns the
    pair ``(d/dz, d/dzbar)`` of first-derivative tables and ``d2h(z)`` the pair
    ``(d^2/dz dz, d^2/dz dzbar)``; when absent, central differences are used.
    """

    n: int
    h: Callable[[np.ndarray], np.ndarray]
    domain: Callable[[np.ndarray], Any] = _everywhere
    dh: Callable | None = None
    d2h: Callable | None = None
    fd_step: float = 1e-5
    kahler_expected: bool = False
    balanced_expected: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)
    injectivity_bound: float = math.inf
    sample_radius: tuple[float, float] = (0.0, 0.5)
    antipode: Callable[[np.ndarray], np.ndarray] | None = None
    hsc_constant: float | None = None

    @property
    def tags(self) -> dict[str, bool]:
        return {"kahler_expected": self.kahler_expected, "balanced_expected": self.balanced_expected}

    @property
    def spec(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}({','.join(repr(v) for v in self.params.values())})"

    def contains(self, z) -> np.ndarray:
        return np.asarray(self.domain(np.asarray(z, dtype=complex)), dtype=bool)

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Seeded points with |z| uniform in ``sample_radius`` and uniform direction."""
        lo, hi = self.sample_radius
        d = rng.normal(size=(count, 2 * self.n))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        r = rng.uniform(lo, hi, size=(count, 1))
        return to_complex(r * d)


def as_point(model: MetricModel, p) -> np.ndarray:
    z = np.asarray(p, dtype=complex)
    if z.shape[-1:] != (model.n,):
        raise ValueError(f"expected points with {model.n} complex coordinates, got shape {z.shape}")
    return z


def check_domain(model: MetricModel, z: np.ndarray, what: str = "point") -> None:
    inside = model.contains(z)
    if not np.all(inside):
        bad = np.asarray(z)[~inside] if np.ndim(inside) else z
        raise DomainError(f"{what} outside the domain of {model.spec}: {np.asarray(bad).reshape(-1)[:4]}")


def real_metric(h: np.ndarray) -> np.ndarray:
    """2n x 2n real metric ``2 [[Re h, Im h], [-Im h, Re h]]``."""
    a, b = h.real, h.imag
    top = np.concatenate([a, b], axis=-1)
    bottom = np.concatenate([-b, a], axis=-1)
    return 2.0 * np.concatenate([top, bottom], axis=-2)


def _check_positive(h: np.ndarray) -> None:
    herm = np.linalg.norm(h - np.swapaxes(h, -1, -2).conj(), axis=(-2, -1))
    if np.any(herm > 1e-12 * np.linalg.norm(h, axis=(-2, -1))):
        raise SingularMetric("metric matrix is not Hermitian")
    if np.any(np.linalg.eigvalsh(h)[..., 0] <= 0):
        raise SingularMetric("metric matrix is not positive definite")


def eval_metric(model: MetricModel, p) -> MetricEval:
    z = as_point(model, p)
    check_domain(model, z)
    h = np.asarray(model.h(z), dtype=complex)
    _check_positive(h)
    return MetricEval(h, real_metric(h), np.linalg.inv(h))


def _shift(z: np.ndarray, a: int, step) -> np.ndarray:
    n = z.shape[-1]
    out = np.array(z, dtype=complex, copy=True)
    out[..., a % n] += step * (1j if a >= n else 1.0)
    return out


def _fd_first(model: MetricModel, z: np.ndarray, check: bool):
    n = model.n
    s = model.fd_step * np.maximum(1.0, np.linalg.norm(z, axis=-1))
    sc = s[..., None, None]
    dx = []
    for a in range(2 * n):
        zp, zm = _shift(z, a, s), _shift(z, a, -s)
        if check:
            check_domain(model, zp, "finite-difference stencil")
            check_domain(model, zm, "finite-difference stencil")
        dx.append((model.h(zp) - model.h(zm)) / (2 * sc))
    dx = np.stack(dx, axis=-3)  # [..., a, i, j]
    ddx, ddy = dx[..., :n, :, :], dx[..., n:, :, :]
    return 0.5 * (ddx - 1j * ddy), 0.5 * (ddx + 1j * ddy)


def _fd_second(model: MetricModel, z: np.ndarray, check: bool):
    n = model.n
    s = FD_STEP_SECOND * np.maximum(1.0, np.linalg.norm(z, axis=-1))
    sc = s[..., None, None]
    h0 = model.h(z)
    hess = np.empty(z.shape[:-1] + (2 * n, 2 * n, n, n), dtype=complex)
    for a in range(2 * n):
        for b in range(a, 2 * n):
            if a == b:
                zp, zm = _shift(z, a, s), _shift(z, a, -s)
                pts = (zp, zm)
                val = (model.h(zp) - 2 * h0 + model.h(zm)) / sc**2
            else:
                pp = _shift(_shift(z, a, s), b, s)
                pm = _shift(_shift(z, a, s), b, -s)
                mp = _shift(_shift(z, a, -s), b, s)
                mm = _shift(_shift(z, a, -s), b, -s)
                pts = (pp, pm, mp, mm)
                val = (model.h(pp) - model.h(pm) - model.h(mp) + model.h(mm)) / (4 * sc**2)
            if check:
                for q in pts:
                    check_domain(model, q, "finite-difference stencil")
            hess[..., a, b, :, :] = val
            hess[..., b, a, :, :] = val
    xx = hess[..., :n, :n, :, :]
    xy = hess[..., :n, n:, :, :]
    yx = hess[..., n:, :n, :, :]
    yy = hess[..., n:, n:, :, :]
    dzz = 0.25 * (xx - 1j * xy - 1j * yx - yy)
    dzzb = 0.25 * (xx + 1j * xy - 1j * yx + yy)
    return dzz, dzzb


def metric_partials(model: MetricModel, p, order: int = 1, check: bool = True) -> MetricJet:
    """Metric and its Wirtinger derivatives up to ``order`` (1 or 2)."""
    z = as_point(model, p)
    if check:
        check_domain(model, z)
    h = np.asarray(model.h(z), dtype=complex)
    if model.dh is not None:
        dh, dbh = model.dh(z)
    else:
        dh, dbh = _fd_first(model, z, check)
    if order < 2:
        return MetricJet(h, dh, dbh)
    if model.d2h is not None:
        dzz, dzzb = model.d2h(z)
    else:
        dzz, dzzb = _fd_second(model, z, check)
    return MetricJet(h, dh, dbh, dzz, dzzb)


def complex_metric(h: np.ndarray) -> np.ndarray:
    """C-bilinear metric on the complex frame: G[i, jbar] = h_{i jbar}, G[jbar, i] = h_{i jbar}."""
    n = h.shape[-1]
    g = np.zeros(h.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    g[..., :n, n:] = h
    g[..., n:, :n] = np.swapaxes(h, -1, -2)
    return g


def g_bilinear(model: MetricModel, p, va, wa) -> complex:
    """C-bilinear pairing of two vectors given by complex frame components."""
    h = eval_metric(model, p).h
    g = complex_metric(h)
    return np.einsum("...a,...ab,...b->...", np.asarray(va, complex), g, np.asarray(wa, complex))


def pairings(model: MetricModel, p, X, Y) -> Pairing:
    x, y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    ev = eval_metric(model, p)
    real_val = float(x @ ev.g_real @ y)
    bil = complex(complexify(x) @ complex_metric(ev.h) @ complexify(y))
    return Pairing(real_val, bil, float(x @ ev.g_real @ x))


def norm(model: MetricModel, p, X) -> float:
    return math.sqrt(pairings(model, p, X, X).norm2)


def apply_J(X):
    """J on real components; returns the same type it was given."""
    x = np.asarray(X, dtype=float)
    jx = x @ j_matrix(x.shape[-1] // 2).T
    return TangentVector(jx) if isinstance(X, TangentVector) else jx


def omega_matrix(g_real: np.ndarray) -> np.ndarray:
    """Components omega_{ab} = g(J d_a, d_b)."""
    n = g_real.shape[-1] // 2
    return np.swapaxes(j_matrix(n), 0, 1) @ g_real


def fundamental_form(model: MetricModel, p, X, Y) -> float:
    ev = eval_metric(model, p)
    return float(np.asarray(X, float) @ omega_matrix(ev.g_real) @ np.asarray(Y, float))


def real_metric_derivatives(jet: MetricJet) -> np.ndarray:
    """[..., a, :, :] = d g_real / d x^a."""
    n = jet.h.shape[-1]
    dx = jet.dh + jet.dbh
    dy = 1j * (jet.dh - jet.dbh)
    d = np.concatenate([dx, dy], axis=-3)  # [..., a, i, j]
    dg = real_metric(d)
    assert dg.shape[-3] == 2 * n
    return dg


def d_omega_tensor(model: MetricModel, p) -> np.ndarray:
    """Real components (d omega)_{abc} = d_a w_bc + d_b w_ca + d_c w_ab."""
    jet = metric_partials(model, p, order=1)
    dom = omega_matrix(real_metric_derivatives(jet))  # [..., a, b, c] = d_a w_bc
    return dom + np.einsum("...bca->...abc", dom) + np.einsum("...cab->...abc", dom)


def d_omega(model: MetricModel, p, X, Y, Z) -> float:
    t = d_omega_tensor(model, p)
    return float(np.einsum("abc,a,b,c->", t, np.asarray(X, float), np.asarray(Y, float), np.asarray(Z, float)))


def omega_convention_residual(model: MetricModel, p, rng: np.random.Generator, trials: int = 4) -> float:
    """Max |g(JX,Y) - sqrt(-1) h_{i jbar} (dz^i ^ dzbar^j)(X,Y)| over random real X, Y."""
    ev = eval_metric(model, p)
    om = omega_matrix(ev.g_real)
    worst = 0.0
    for _ in range(trials):
        x, y = rng.normal(size=(2, 2 * model.n))
        u, v = to_complex(x), to_complex(y)
        wedge = np.einsum("ij,i,j->", ev.h, u, v.conj()) - np.einsum("ij,i,j->", ev.h, v, u.conj())
        val = 1j * wedge
        worst = max(worst, abs(x @ om @ y - val))
    return worst


def self_test(model: MetricModel, p, rng: np.random.Generator | None = None, tol: float = 1e-10) -> None:
    """Startup check of the normalization and omega conventions at one point."""
    rng = rng if rng is not None else np.random.default_rng(0)
    ev = eval_metric(model, p)
    scale = np.linalg.norm(ev.h)
    n = model.n
    # h^{i jbar} = 2 (g^{ij} - sqrt(-1) g^{i, n+j})
    ginv = np.linalg.inv(ev.g_real)
    raised = 2 * (ginv[:n, :n] - 1j * ginv[:n, n:])
    if np.max(np.abs(raised - ev.h_inv.T)) > tol * max(1.0, np.linalg.norm(ev.h_inv)):
        raise SelfTestError(f"{model.spec}: inverse-metric complexification mismatch")
    if omega_convention_residual(model, p, rng) > tol * max(1.0, scale):
        raise SelfTestError(f"{model.spec}: omega = sqrt(-1) h dz^dzbar disagrees with g(JX,Y)")
