"""Complexified Christoffel symbols of the Levi-Civita and Strominger-Bismut connections.

Tables use the complex index set {0..2n-1}: ``a < n`` is d/dz^{a+1}, ``a >= n``
is d/dzbar^{a-n+1}.  ``gamma[..., C, A, B]`` is the coefficient in
``nabla_{d_A} d_B = gamma^C_{AB} d_C`` (first lower index = direction).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chart import (
    MetricJet,
    MetricModel,
    as_point,
    complex_metric,
    complexify,
    d_omega_tensor,
    index_label,
    j_matrix,
    metric_partials,
)

FLAVORS = ("lc", "sb")


class ComplexJet(NamedTuple):
    g: np.ndarray  # [..., A, B]
    ginv: np.ndarray
    dg: np.ndarray  # [..., E, A, B] = d_E G_{AB}
    d2g: np.ndarray | None  # [..., E, F, A, B] = d_E d_F G_{AB}


def _stack_dir(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Place holomorphic/antiholomorphic derivative tables of h into the bilinear-metric layout."""
    n = a.shape[-1]
    shape = a.shape[:-3] + (2 * n, 2 * n, 2 * n)
    out = np.zeros(shape, dtype=complex)
    for blk, src in ((slice(0, n), a), (slice(n, 2 * n), b)):
        out[..., blk, :n, n:] = src
        out[..., blk, n:, :n] = np.swapaxes(src, -1, -2)
    return out


def complex_jet(jet: MetricJet) -> ComplexJet:
    n = jet.h.shape[-1]
    g = complex_metric(jet.h)
    ginv = np.linalg.inv(g)
    dg = _stack_dir(jet.dh, jet.dbh)
    d2g = None
    if jet.dzz is not None:
        # d_kbar d_lbar h_{i jbar} = conj(d_k d_l h_{j ibar})
        dbb = np.swapaxes(jet.dzz, -1, -2).conj()
        dzbz = np.swapaxes(jet.dzzb, -3, -4)  # [..., k, l] = d_kbar d_l
        rows = [_stack_dir(jet.dzz, jet.dzzb), _stack_dir(dzbz, dbb)]
        d2g = np.concatenate(rows, axis=-4)
        assert d2g.shape[-4] == 2 * n
    return ComplexJet(g, ginv, dg, d2g)


def lowered_lc(dg: np.ndarray) -> np.ndarray:
    """L[..., A, B, D] = 1/2 (d_B G_AD + d_A G_BD - d_D G_AB)."""
    t1 = np.swapaxes(dg, -3, -2)  # [B, A, D] -> indexed as [A, B, D]
    return 0.5 * (t1 + dg - np.moveaxis(dg, -3, -1))


def lowered_sb(dg: np.ndarray) -> np.ndarray:
    """G_{CD} SBgamma^C_{AB}, linear in the metric derivatives.

    Holomorphic families, lowered on a barred slot:
    ``L[i, j, lbar] = d_j h_{i lbar}`` and
    ``L[jbar, i, lbar] = d_jbar h_{i lbar} - d_lbar h_{i jbar}``; the
    antiholomorphic families are the barred mirror images.
    """
    m = dg.shape[-1]
    n = m // 2
    hol, bar = slice(0, n), slice(n, m)
    L = np.zeros(dg.shape, dtype=complex)
    # dg[..., E, A, B]
    L[..., hol, hol, bar] = np.swapaxes(dg[..., hol, hol, bar], -3, -2)
    L[..., bar, hol, bar] = dg[..., bar, hol, bar] - np.einsum(
        "...lij->...jil", dg[..., bar, hol, bar]
    )
    L[..., bar, bar, hol] = np.swapaxes(dg[..., bar, bar, hol], -3, -2)
    L[..., hol, bar, hol] = dg[..., hol, bar, hol] - np.einsum(
        "...lij->...jil", dg[..., hol, bar, hol]
    )
    return L


_LOWERED = {"lc": lowered_lc, "sb": lowered_sb}


def _check_flavor(flavor: str) -> str:
    f = flavor.lower()
    if f not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}, got {flavor!r}")
    return f


def gamma_table(flavor: str, cj: ComplexJet) -> np.ndarray:
    L = _LOWERED[flavor](cj.dg)
    return np.moveaxis(L @ np.swapaxes(cj.ginv, -1, -2)[..., None, :, :], -1, -3)


def gamma_and_derivative(flavor: str, cj: ComplexJet) -> tuple[np.ndarray, np.ndarray]:
    """Gamma and dgamma[..., E, C, A, B] = d_E gamma^C_{AB} (needs second metric derivatives)."""
    lower = _LOWERED[flavor]
    gamma = gamma_table(flavor, cj)
    dL = lower(cj.d2g)  # leading E axis rides along as a batch axis
    m = gamma.shape[-1]
    lead = gamma.shape[:-3]
    dG_gamma = (cj.dg @ gamma.reshape(lead + (1, m, m * m))).reshape(lead + (m,) * 4)
    x = dL - np.moveaxis(dG_gamma, -3, -1)  # [..., E, A, B, D]
    dgamma = np.moveaxis(x @ np.swapaxes(cj.ginv, -1, -2)[..., None, None, :, :], -1, -3)
    return gamma, dgamma


def point_jet(model: MetricModel, p, order: int = 1, check: bool = True) -> ComplexJet:
    return complex_jet(metric_partials(model, as_point(model, p), order=order, check=check))


@dataclass(frozen=True, eq=False)
class ConnectionField:
    flavor: str
    point: np.ndarray
    gamma: np.ndarray
    g: np.ndarray

    @property
    def n(self) -> int:
        return self.point.shape[-1]

    def contract(self, X, Y) -> np.ndarray:
        """Complex frame components of nabla_X Y for coordinate-constant real X, Y."""
        return np.einsum("...CAB,...A,...B->...C", self.gamma, complexify(X), complexify(Y))

    def nonzero(self, tol: float = 1e-14) -> list[dict]:
        """Nonzero components as records (single point only)."""
        if self.gamma.ndim != 3:
            raise ValueError("nonzero() needs a single point")
        n = self.n
        out = []
        for c, a, b in zip(*np.nonzero(np.abs(self.gamma) > tol)):
            v = self.gamma[c, a, b]
            out.append({"upper": index_label(c, n), "lower": [index_label(a, n), index_label(b, n)],
                        "re": float(v.real), "im": float(v.imag)})
        return out


def christoffel(flavor: str, model: MetricModel, p) -> ConnectionField:
    flavor = _check_flavor(flavor)
    z = as_point(model, p)
    cj = point_jet(model, z)
    return ConnectionField(flavor, z, gamma_table(flavor, cj), cj.g)


@dataclass(frozen=True, eq=False)
class TorsionField:
    point: np.ndarray
    t_mixed: np.ndarray  # [..., k, i, j] = T^k_{ij}
    full: np.ndarray  # [..., C, A, B] = T^C_{AB}
    g: np.ndarray

    @property
    def lowered(self) -> np.ndarray:
        """T[..., A, B, D] = G_{CD} T^C_{AB}."""
        return np.einsum("...CAB,...CD->...ABD", self.full, self.g)

    def __call__(self, X, Y, Z) -> np.ndarray:
        val = np.einsum("...ABD,...A,...B,...D->...", self.lowered, complexify(X), complexify(Y), complexify(Z))
        return val.real


def torsion_from_gamma(gamma: np.ndarray) -> np.ndarray:
    return gamma - np.swapaxes(gamma, -1, -2)


def torsion_sb(model: MetricModel, p) -> TorsionField:
    """SB torsion from the holomorphic generator ``h^{k lbar}(d_j h_{i lbar} - d_i h_{j lbar})``."""
    z = as_point(model, p)
    jet = metric_partials(model, z)
    n = model.n
    hinv_up = np.swapaxes(np.linalg.inv(jet.h), -1, -2)  # h^{k lbar}
    # jet.dh[..., j, i, l] = d_j h_{i lbar}
    low = np.swapaxes(jet.dh, -3, -2) - jet.dh  # [..., i, j, l]
    t_mixed = np.einsum("...kl,...ijl->...kij", hinv_up, low)
    full = np.zeros(z.shape[:-1] + (2 * n,) * 3, dtype=complex)
    full[..., :n, :n, :n] = t_mixed
    full[..., n:, n:, n:] = t_mixed.conj()
    cj = complex_jet(jet)
    gamma = gamma_table("sb", cj)
    # mixed-type families T^k_{jbar i} come from the connection table
    mixed = torsion_from_gamma(gamma)
    full[..., :n, n:, :n] = mixed[..., :n, n:, :n]
    full[..., :n, :n, n:] = mixed[..., :n, :n, n:]
    full[..., n:, n:, :n] = mixed[..., n:, n:, :n]
    full[..., n:, :n, n:] = mixed[..., n:, :n, n:]
    return TorsionField(z, t_mixed, full, cj.g)


def trace_torsion(model: MetricModel, p) -> np.ndarray:
    """eta_k = sum_s T^s_{sk}."""
    t = torsion_sb(model, p).t_mixed
    return np.einsum("...ssk->...k", t)


class DefiningResiduals(NamedTuple):
    r_defn: float
    r_torsion: float


def defining_relation_residuals(model: MetricModel, p, X, Y, Z) -> DefiningResiduals:
    """Residuals of g(SB_X Y, Z) - g(LC_X Y, Z) = 1/2 domega(JX,JY,JZ) and T(X,Y,Z) = domega(JX,JY,JZ).

    X, Y, Z are extended as coordinate-constant fields, so covariant
    derivatives reduce to Christoffel contractions.  The 3-form is evaluated
    from real-coordinate derivatives of omega_{ab}, independently of the
    complex tables.
    """
    z = as_point(model, p)
    cj = point_jet(model, z)
    diff = gamma_table("sb", cj) - gamma_table("lc", cj)
    xa, ya, za = complexify(X), complexify(Y), complexify(Z)
    lhs = np.einsum("...CAB,...CD,...A,...B,...D->...", diff, cj.g, xa, ya, za)
    jm = j_matrix(model.n)
    jx, jy, jz = (np.asarray(v, float) @ jm.T for v in (X, Y, Z))
    dw = np.einsum("...abc,...a,...b,...c->...", d_omega_tensor(model, z), jx, jy, jz)
    tors = torsion_sb(model, z)(X, Y, Z)
    return DefiningResiduals(np.max(np.abs(lhs - 0.5 * dw)), np.max(np.abs(tors - dw)))


def covariant_derivative(gamma: np.ndarray, velocity: np.ndarray, field: np.ndarray, field_dot: np.ndarray) -> np.ndarray:
    """Real components of dV/dt + gamma(gamma', V), with gamma evaluated pointwise."""
    va, fa = complexify(velocity), complexify(field)
    corr = np.einsum("...CAB,...A,...B->...C", gamma, va, fa)
    n = velocity.shape[-1] // 2
    return field_dot + np.concatenate([corr[..., :n].real, corr[..., :n].imag], axis=-1)
