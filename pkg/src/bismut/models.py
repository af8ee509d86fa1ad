"""Registry of concrete Hermitian metrics.

Each registered metric is written once as a sympy matrix in the independent
symbols ``z`` and ``w = conj(z)``; Wirtinger derivatives are then ordinary
partial derivatives, compiled to vectorized numpy code.
"""
from __future__ import annotations

import json
import math
import re
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
import sympy as sp

from .chart import MetricModel, eval_metric, self_test
from .errors import BadParams, ConfigError, SingularMetric, UnknownModel


def _compile(exprs: list, z, w) -> Callable:
    """Vectorized evaluator of a flat expression list; constant entries are broadcast."""
    idx = [k for k, e in enumerate(exprs) if not (e.is_number and e == 0)]
    if not idx:
        def zero(zv):
            return np.zeros(zv.shape[:-1] + (len(exprs),), dtype=complex)
        return zero
    fn = sp.lambdify([*z, *w], [exprs[k] for k in idx], modules="numpy", cse=True)

    def evaluate(zv: np.ndarray) -> np.ndarray:
        args = [zv[..., k] for k in range(zv.shape[-1])] + [zv[..., k].conj() for k in range(zv.shape[-1])]
        vals = fn(*args)
        out = np.zeros(zv.shape[:-1] + (len(exprs),), dtype=complex)
        for k, v in zip(idx, vals):
            out[..., k] = v
        return out

    return evaluate


def symbolic_model(n: int, builder: Callable, **kwargs) -> MetricModel:
    """Build a MetricModel with analytic first and second derivatives.

    ``builder(z, w)`` returns an n x n sympy Matrix h_{i jbar} in the symbols
    z (holomorphic) and w (their conjugates).
    """
    z = sp.symbols(f"z1:{n + 1}")
    w = sp.symbols(f"w1:{n + 1}")
    H = sp.Matrix(builder(z, w))
    flat_h = list(H)
    first_z = [e for k in range(n) for e in H.diff(z[k])]
    first_w = [e for k in range(n) for e in H.diff(w[k])]
    second_zz = [e for k in range(n) for l in range(n) for e in H.diff(z[k]).diff(z[l])]
    second_zw = [e for k in range(n) for l in range(n) for e in H.diff(z[k]).diff(w[l])]
    f0 = _compile(flat_h, z, w)
    f1 = _compile(first_z + first_w, z, w)
    f2 = _compile(second_zz + second_zw, z, w)

    def h(zv):
        zv = np.asarray(zv, dtype=complex)
        return f0(zv).reshape(zv.shape[:-1] + (n, n))

    def dh(zv):
        zv = np.asarray(zv, dtype=complex)
        out = f1(zv).reshape(zv.shape[:-1] + (2, n, n, n))
        return out[..., 0, :, :, :], out[..., 1, :, :, :]

    def d2h(zv):
        zv = np.asarray(zv, dtype=complex)
        out = f2(zv).reshape(zv.shape[:-1] + (2, n, n, n, n))
        return out[..., 0, :, :, :, :], out[..., 1, :, :, :, :]

    return MetricModel(n=n, h=h, dh=dh, d2h=d2h, **kwargs)


def _radius(zv):
    return np.sqrt(np.sum(np.abs(np.asarray(zv)) ** 2, axis=-1))


def _fs_matrix(z, w, scale):
    n = len(z)
    phi = 1 + sum(z[k] * w[k] for k in range(n))
    return sp.Matrix(n, n, lambda i, j: scale * ((1 if i == j else 0) / phi - w[i] * z[j] / phi**2))


def _antipode(zv):
    zv = np.asarray(zv, dtype=complex)
    r2 = np.sum(np.abs(zv) ** 2, axis=-1, keepdims=True)
    return -zv / r2


@lru_cache(maxsize=None)
def flat(n: int = 1) -> MetricModel:
    _check_dim(n)
    return symbolic_model(
        n, lambda z, w: sp.eye(n), name="flat", params={"n": n},
        kahler_expected=True, balanced_expected=True, sample_radius=(0.0, 1.0),
    )


@lru_cache(maxsize=None)
def fubini_study(n: int = 1, scale: float = 1.0) -> MetricModel:
    """Fubini-Study metric with potential ``scale * log(1 + |z|^2)``.

    Holomorphic sectional curvature is ``2 / scale`` in this normalization.
    """
    _check_dim(n)
    if not scale > 0:
        raise BadParams("fubini_study scale must be positive")
    k_fs = 2.0 / scale
    return symbolic_model(
        n, lambda z, w: _fs_matrix(z, w, sp.Float(scale)), name="fubini_study",
        params={"n": n, "scale": float(scale)},
        domain=lambda zv: _radius(zv) < 1e4,
        kahler_expected=True, balanced_expected=True,
        injectivity_bound=0.95 * math.pi / (2 * math.sqrt(k_fs)),
        sample_radius=(0.0, 1.5), antipode=_antipode, hsc_constant=k_fs,
    )


@lru_cache(maxsize=None)
def hopf(n: int = 2) -> MetricModel:
    """``h_{i jbar} = delta_ij / |z|^2`` on 0.1 <= |z| <= 10."""
    _check_dim(n)

    def build(z, w):
        r2 = sum(z[k] * w[k] for k in range(n))
        return sp.eye(n) / r2

    return symbolic_model(
        n, build, name="hopf", params={"n": n},
        domain=lambda zv: (_radius(zv) >= 0.1) & (_radius(zv) <= 10.0),
        kahler_expected=(n == 1), balanced_expected=(n == 1),
        injectivity_bound=0.5, sample_radius=(0.5, 2.0),
    )


@lru_cache(maxsize=None)
def fs_perturbed(n: int = 1, eps: float = 0.1) -> MetricModel:
    """Fubini-Study plus ``eps |z|^2 delta_ij`` on |z| < 1.

    The perturbation has nonzero torsion for n >= 2.  For n = 1 every
    Hermitian metric is Kahler, so the tags follow the dimension.
    """
    _check_dim(n)
    if not 0.0 <= eps <= 0.2:
        raise BadParams("fs_perturbed requires eps in [0, 0.2]")

    def build(z, w):
        r2 = sum(z[k] * w[k] for k in range(n))
        return _fs_matrix(z, w, sp.Integer(1)) + sp.Float(eps) * r2 * sp.eye(n)

    kahler = n == 1 or eps == 0.0
    model = symbolic_model(
        n, build, name="fs_perturbed", params={"n": n, "eps": float(eps)},
        domain=lambda zv: _radius(zv) < 1.0,
        kahler_expected=kahler, balanced_expected=kahler,
        injectivity_bound=0.5, sample_radius=(0.0, 0.6),
    )
    _positivity_scan(model, radius=0.999)
    return model


def _check_dim(n) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise BadParams(f"complex dimension must be a positive integer, got {n!r}")


def _positivity_scan(model: MetricModel, radius: float, count: int = 100) -> None:
    rng = np.random.default_rng(12345)
    d = rng.normal(size=(count, 2 * model.n))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    r = radius * rng.uniform(0, 1, size=(count, 1)) ** (1 / (2 * model.n))
    pts = d[:, : model.n] * r + 1j * d[:, model.n:] * r
    try:
        eval_metric(model, pts)
    except SingularMetric as exc:
        raise BadParams(f"{model.spec}: metric not positive definite on the domain sample") from exc


REGISTRY: dict[str, Callable[..., MetricModel]] = {
    "flat": flat,
    "fubini_study": fubini_study,
    "hopf": hopf,
    "fs_perturbed": fs_perturbed,
}

_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def registry(name: str, *args, fd_step: float | None = None, **kwargs) -> MetricModel:
    """Resolve a registered metric; runs the startup convention self-test."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; known: {sorted(REGISTRY)}") from None
    try:
        model = factory(*args, **kwargs)
    except TypeError as exc:
        raise BadParams(f"bad parameters for {name}: {exc}") from None
    if fd_step is not None:
        from dataclasses import replace

        model = replace(model, fd_step=float(fd_step))
    _startup_checks(model)
    return model


@lru_cache(maxsize=None)
def _startup_checks_cached(model: MetricModel) -> None:
    from .curvature import ricci_self_test

    rng = np.random.default_rng(2024)
    p = model.sample_points(rng, 1)[0]
    self_test(model, p, rng)
    ricci_self_test(model, p, rng)


def _startup_checks(model: MetricModel) -> None:
    _startup_checks_cached(model)


def _parse_number(tok: str):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def parse_model_spec(spec: str) -> MetricModel:
    """Parse ``"hopf(2)"``, ``"fubini_study(1, 2.0)"`` or a bare name."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise ConfigError(f"cannot parse model spec {spec!r}")
    name, arglist = m.groups()
    args = [] if not arglist or not arglist.strip() else [_parse_number(t) for t in arglist.split(",")]
    return registry(name, *args)


def model_from_config(cfg: dict) -> MetricModel:
    """Resolve ``{"name": ..., "params": {...} | [...], "fd_step": ...}``."""
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ConfigError("model config needs a 'name'")
    unknown = set(cfg) - {"name", "params", "fd_step"}
    if unknown:
        raise ConfigError(f"unknown model keys: {sorted(unknown)}")
    params = cfg.get("params", {})
    if isinstance(params, list):
        return registry(cfg["name"], *params, fd_step=cfg.get("fd_step"))
    return registry(cfg["name"], fd_step=cfg.get("fd_step"), **params)


def load_model(path: str | Path) -> MetricModel:
    return model_from_config(json.loads(Path(path).read_text()))
