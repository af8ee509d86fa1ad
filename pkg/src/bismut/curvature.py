"""Curvature of the LC and SB connections, Ricci flavors and holomorphic sectional curvature.

Slot convention: ``R(X,Y,Z,W) = <nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z, W>``.
One evaluator serves every consumer (index forms, Jacobi fields, Ricci).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .chart import (
    MetricModel,
    as_point,
    basis_matrix,
    complexify,
    j_matrix,
    real_metric,
    to_complex,
)
from .connections import ComplexJet, _check_flavor, gamma_and_derivative, point_jet, trace_torsion
from .errors import SelfTestError, ZeroVector


def curvature_from_gamma(gamma: np.ndarray, dgamma: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Lowered table R[..., A, B, C, D] = G_{ED} R^E_{ABC}."""
    m = gamma.shape[-1]
    lead = gamma.shape[:-3]
    # quad[..., d, a, b, c] = gamma^d_{ae} gamma^e_{bc}, via matmul (batched einsum skips BLAS)
    quad = (gamma.reshape(lead + (m * m, m)) @ gamma.reshape(lead + (m, m * m))).reshape(lead + (m,) * 4)
    up = (
        np.einsum("...adbc->...abcd", dgamma)
        - np.einsum("...bdac->...abcd", dgamma)
        + np.einsum("...dabc->...abcd", quad)
        - np.einsum("...dbac->...abcd", quad)
    )
    return up @ g[..., None, None, :, :]


def curvature_table(flavor: str, cj: ComplexJet) -> np.ndarray:
    gamma, dgamma = gamma_and_derivative(flavor, cj)
    return curvature_from_gamma(gamma, dgamma, cj.g)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    flavor: str
    point: np.ndarray
    r: np.ndarray  # complex lowered table [..., A, B, C, D]
    g: np.ndarray  # complex bilinear metric [..., A, B]
    _real: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.point.shape[-1]

    @property
    def ginv(self) -> np.ndarray:
        return np.linalg.inv(self.g)

    @property
    def h_up(self) -> np.ndarray:
        """h^{i lbar} as an n x n array (the G^{i, lbar} block)."""
        return self.ginv[..., : self.n, self.n:]

    @property
    def real(self) -> np.ndarray:
        """Real-coordinate components R(d_a, d_b, d_c, d_d)."""
        if not self._real:
            p = basis_matrix(self.n)
            rr = np.einsum("...ABCD,Aa,Bb,Cc,Dd->...abcd", self.r, p, p, p, p)
            self._real.append(rr.real)
        return self._real[0]

    def complex(self, xa, ya, za, wa) -> np.ndarray:
        """C-multilinear evaluation on complex frame components."""
        return np.einsum("...ABCD,...A,...B,...C,...D->...", self.r, xa, ya, za, wa)

    def __call__(self, X, Y, Z, W) -> np.ndarray:
        return self.complex(complexify(X), complexify(Y), complexify(Z), complexify(W)).real


def curvature(flavor: str, model: MetricModel, p) -> CurvatureField:
    flavor = _check_flavor(flavor)
    z = as_point(model, p)
    cj = point_jet(model, z, order=2)
    return CurvatureField(flavor, z, curvature_table(flavor, cj), cj.g)


def skew_residual(field: CurvatureField) -> float:
    r = field.r
    scale = max(1.0, float(np.max(np.abs(r))))
    first = np.max(np.abs(r + np.swapaxes(r, -4, -3)))
    last = np.max(np.abs(r + np.swapaxes(r, -2, -1)))
    return float(max(first, last) / scale)


def type_vanishing_residual(field: CurvatureField) -> float:
    """max |R_{AB k l}|, |R_{AB kbar lbar}|: the families killed by nabla J = 0."""
    n = field.n
    r = field.r
    return float(max(np.max(np.abs(r[..., :n, :n])), np.max(np.abs(r[..., n:, n:]))))


def conjugation_residual(field: CurvatureField) -> float:
    n = field.n
    perm = np.r_[n: 2 * n, 0:n]
    r = field.r
    mirrored = r[..., perm, :, :, :][..., :, perm, :, :][..., :, :, perm, :][..., :, :, :, perm]
    return float(np.max(np.abs(mirrored - r.conj())))


def bianchi_defect(field: CurvatureField, X, Y, Z, W) -> np.ndarray:
    return np.abs(field(X, Y, Z, W) + field(Y, Z, X, W) + field(Z, X, Y, W))


def pair_defect(field: CurvatureField, X, Y, Z, W) -> np.ndarray:
    return np.abs(field(X, Y, Z, W) - field(Z, W, X, Y))


def _real_ginv(field: CurvatureField) -> np.ndarray:
    n = field.n
    h = field.g[..., :n, n:]
    return np.linalg.inv(real_metric(h))


def ricci_real_from_field(field: CurvatureField, X, Y) -> np.ndarray:
    """sum_{i,l} g^{il} R(d/dx^i, X, Y, d/dx^l) on the real-coordinate table."""
    return np.einsum("...il,...iabl,...a,...b->...", _real_ginv(field), field.real, np.asarray(X, float), np.asarray(Y, float))


def ricci_complexified_from_field(field: CurvatureField, X, Y) -> np.ndarray:
    """h^{i lbar} R(d_i, X, Y, d_lbar) + h^{l ibar} R(d_ibar, X, Y, d_l)."""
    n = field.n
    hup = field.h_up  # [i, l] = h^{i lbar}; h^{l ibar} = hup[l, i]
    xa, ya = complexify(X), complexify(Y)
    r = field.r
    first = np.einsum("...il,...iabl,...a,...b->...", hup, r[..., :n, :, :, n:], xa, ya)
    second = np.einsum("...li,...iabl,...a,...b->...", hup, r[..., n:, :, :, :n], xa, ya)
    return first + second


def ricci_real_sb(model: MetricModel, p, X, Y) -> float:
    field = curvature("sb", model, p)
    return float(np.real(ricci_complexified_from_field(field, X, Y)))


def ricci_matrix(field: CurvatureField) -> np.ndarray:
    """Q[..., j, k] = h^{i lbar} R_{i jbar k lbar}."""
    n = field.n
    return np.einsum("...il,...ijkl->...jk", field.h_up, field.r[..., :n, n:, :n, n:])


def ricci_hol_from_field(field: CurvatureField, v10) -> np.ndarray:
    """h^{i lbar} R(d_i, Vbar, V, d_lbar) for V = v^k d_k."""
    v = np.asarray(v10, dtype=complex)
    return np.einsum("...jk,...j,...k->...", ricci_matrix(field), v.conj(), v)


def ricci_hol_sb(model: MetricModel, p, v10) -> float:
    """Holomorphic Ricci value (real part; the imaginary part is returned by ``ricci_hol_from_field``)."""
    v = np.asarray(v10, dtype=complex)
    if not np.any(v):
        raise ZeroVector("holomorphic Ricci needs V != 0")
    return float(np.real(ricci_hol_from_field(curvature("sb", model, p), v)))


def hsc_from_field(field: CurvatureField, X) -> np.ndarray:
    x = np.asarray(X, dtype=float)
    n = field.n
    jx = x @ j_matrix(n).T
    norm2 = np.einsum("...a,...ab,...b->...", x, real_metric(field.g[..., :n, n:]), x)
    return np.einsum("...abcd,...a,...b,...c,...d->...", field.real, jx, x, x, jx) / norm2**2


def hsc_sb(model: MetricModel, p, X) -> float:
    if not np.any(np.asarray(X, dtype=float)):
        raise ZeroVector("holomorphic sectional curvature needs X != 0")
    return float(hsc_from_field(curvature("sb", model, p), X))


def ricci_self_test(model: MetricModel, p, rng: np.random.Generator | None = None, tol: float = 1e-8) -> None:
    """Real-basis and complexified Ricci contractions must agree."""
    rng = rng if rng is not None else np.random.default_rng(0)
    field = curvature("sb", model, p)
    x, y = rng.normal(size=(2, 2 * model.n))
    a = ricci_real_from_field(field, x, y)
    b = ricci_complexified_from_field(field, x, y)
    scale = max(1.0, float(np.max(np.abs(field.r))))
    if abs(a - b) > tol * scale or abs(np.imag(b)) > tol * scale:
        raise SelfTestError(f"{model.spec}: real and complexified Ricci disagree ({a} vs {b})")


class BalancedReport(NamedTuple):
    points: np.ndarray
    trace_torsion: np.ndarray  # |eta| per point
    ricci_identity: np.ndarray  # |Ric(X,X) - 2 Q_{jk} X^k conj(X^j)|
    holomorphic_trace: np.ndarray  # max |h^{i lbar} R_{i j k lbar}|
    hermitian_defect: np.ndarray  # ||Q - Q^H||

    def passed(self, tol: float = 1e-7) -> bool:
        worst = max(np.max(self.trace_torsion), np.max(self.ricci_identity),
                    np.max(self.holomorphic_trace), np.max(self.hermitian_defect))
        return bool(worst <= tol)


def balanced_identities(model: MetricModel, points, rng: np.random.Generator | None = None) -> BalancedReport:
    """Residuals of the balanced-metric Ricci identities at each sample point (reported, not asserted)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    z = as_point(model, points)
    z = z.reshape(-1, model.n)
    n = model.n
    field = curvature("sb", model, z)
    eta = np.linalg.norm(trace_torsion(model, z), axis=-1)
    x = rng.normal(size=(z.shape[0], 2 * n))
    q = ricci_matrix(field)
    u = to_complex(x)
    ric = ricci_complexified_from_field(field, x, x)
    quad = 2 * np.einsum("...jk,...k,...j->...", q, u, u.conj())
    ric_id = np.abs(ric - quad)
    hol = np.einsum("...il,...ijkl->...jk", field.h_up, field.r[..., :n, :n, :n, n:])
    hol_max = np.max(np.abs(hol), axis=(-2, -1))
    herm = np.linalg.norm(q - np.swapaxes(q, -1, -2).conj(), axis=(-2, -1))
    return BalancedReport(z, eta, ric_id, hol_max, herm)
