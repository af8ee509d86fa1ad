import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from bismut.chart import (
    TangentVector,
    apply_J,
    complexify,
    d_omega,
    eval_metric,
    fundamental_form,
    metric_partials,
    omega_convention_residual,
    pairings,
    real_metric,
    realify,
    to_complex,
    to_real,
)
from bismut.errors import BadParams, DomainError, SingularMetric, UnknownModel
from bismut.models import flat, fs_perturbed, fubini_study, hopf, parse_model_spec, registry

from oracles import oracle

vec4 = st.lists(st.floats(-3, 3), min_size=4, max_size=4).map(np.array)


def test_flat_metric_at_origin():
    ev = eval_metric(flat(1), [0j])
    assert np.allclose(ev.h, [[1]])
    assert np.allclose(ev.g_real, np.diag([2.0, 2.0]))


def test_fs_metric_at_origin():
    assert np.allclose(eval_metric(fubini_study(1), [0j]).h, [[1]])


def test_hopf_metric_at_unit_point_matches_symbolic_substitution():
    z1, z2 = sp.symbols("z1 z2")
    w1, w2 = sp.symbols("w1 w2")
    h = sp.eye(2) / (z1 * w1 + z2 * w2)
    expect = np.array(h.subs({z1: 1, w1: 1, z2: 0, w2: 0}), dtype=complex)
    assert np.allclose(eval_metric(hopf(2), [1, 0]).h, expect)
    assert np.allclose(expect, np.eye(2))


def test_real_metric_matches_oracle():
    rng = np.random.default_rng(3)
    for model, args in [(hopf(2), ("hopf", 2)), (fs_perturbed(2, 0.1), ("fs_perturbed", 2, 0.1))]:
        z = model.sample_points(rng, 3)
        for p in z:
            assert np.allclose(eval_metric(model, p).g_real, oracle(*args).g(to_real(p)), atol=1e-13)


def test_partials_flat_zero():
    jet = metric_partials(flat(3), np.array([0.1, 0.2j, -0.3]), order=2)
    for t in jet[1:]:
        assert np.all(t == 0)


def test_fs_derivative_zero_at_origin():
    jet = metric_partials(fubini_study(1), [0j])
    assert abs(jet.dh[0, 0, 0]) < 1e-14


def test_hopf_derivative_at_unit_point():
    jet = metric_partials(hopf(2), [1, 0])
    # d/dz1 of 1/(z1 w1 + z2 w2) at (1,0) is -w1/r^4 = -1
    assert abs(jet.dh[0, 0, 0] + 1) < 1e-14


def test_analytic_partials_agree_with_central_differences():
    from dataclasses import replace

    rng = np.random.default_rng(5)
    for model in (hopf(2), fs_perturbed(2, 0.1), fubini_study(2)):
        fd_model = replace(model, dh=None, d2h=None)
        p = model.sample_points(rng, 4)
        a = metric_partials(model, p, order=2)
        b = metric_partials(fd_model, p, order=2)
        assert np.max(np.abs(a.dh - b.dh)) < 1e-8
        assert np.max(np.abs(a.dbh - b.dbh)) < 1e-8
        assert np.max(np.abs(a.dzzb - b.dzzb)) < 1e-5


def test_domain_and_positivity_errors():
    with pytest.raises(DomainError):
        eval_metric(hopf(2), [0.01, 0])
    from dataclasses import replace

    fd_only = replace(hopf(2), dh=None, d2h=None)
    metric_partials(fd_only, [0.2, 0])
    with pytest.raises(DomainError):
        metric_partials(fd_only, [0.1, 0])  # stencil leaves |z| >= 0.1

    bad = replace(flat(1), h=lambda z: -np.ones(z.shape[:-1] + (1, 1), complex))
    with pytest.raises(SingularMetric):
        eval_metric(bad, [0j])


def test_norm_convention():
    assert pairings(flat(1), [0j], [1.0, 0.0], [1.0, 0.0]).norm2 == 2.0
    # X = d/dz + d/dzbar = d/dx at the origin of FS
    assert abs(pairings(fubini_study(1), [0j], [1.0, 0.0], [1.0, 0.0]).norm2 - 2.0) < 1e-14


def test_bilinear_pairing_of_holomorphic_vectors_vanishes():
    from bismut.chart import complex_metric

    rng = np.random.default_rng(0)
    for model in (hopf(2), fs_perturbed(2, 0.1)):
        h = eval_metric(model, model.sample_points(rng, 1)[0]).h
        g = complex_metric(h)
        assert np.all(g[:2, :2] == 0) and np.all(g[2:, 2:] == 0)


def test_apply_J_basics():
    x = np.array([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(apply_J(x), [0, 0, 1, 0])
    v = TangentVector.from_v10(np.array([1, 0], complex))
    assert np.allclose(apply_J(v).v10, [1j, 0])


@given(vec4)
def test_J_squared_is_minus_identity(x):
    assert np.allclose(apply_J(apply_J(x)), -x)


@given(vec4)
def test_complexification_round_trip(x):
    assert np.allclose(realify(complexify(x)), x, atol=1e-14)
    assert np.allclose(to_real(to_complex(x)), x, atol=0)
    v = TangentVector(x)
    assert np.allclose(v.v01, np.conj(v.v10))


@settings(max_examples=30, deadline=None)
@given(vec4, vec4)
def test_metric_is_J_invariant(x, y):
    p = np.array([0.3 + 0.4j, -0.5j])
    model = fs_perturbed(2, 0.1)
    g = eval_metric(model, p).g_real
    jx, jy = apply_J(x), apply_J(y)
    assert abs(jx @ g @ jy - x @ g @ y) <= 1e-10 * (1 + abs(x @ g @ y))


def test_real_and_complex_metric_round_trip():
    rng = np.random.default_rng(2)
    for model in (hopf(3), fs_perturbed(2, 0.2)):
        h = eval_metric(model, model.sample_points(rng, 5)).h
        g = real_metric(h)
        n = model.n
        back = 0.5 * (g[..., :n, :n] + 1j * g[..., :n, n:])
        assert np.max(np.abs(back - h)) <= 1e-12 * np.max(np.abs(h))


def test_fundamental_form_skew_and_positive():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 4))
    p = [0.7, 0.2j]
    assert abs(fundamental_form(hopf(2), p, x, y) + fundamental_form(hopf(2), p, y, x)) < 1e-14
    e1, e3 = np.eye(2)[0], np.eye(2)[1]
    assert fundamental_form(flat(1), [0j], e1, e3) > 0


def test_omega_convention_residual_small():
    rng = np.random.default_rng(1)
    for model in (hopf(2), fs_perturbed(2, 0.1), fubini_study(2)):
        p = model.sample_points(rng, 1)[0]
        assert omega_convention_residual(model, p, rng) < 1e-12


def test_d_omega_kahler_and_hopf_witness():
    rng = np.random.default_rng(8)
    e = np.eye(4)
    for _ in range(5):
        p = fubini_study(2).sample_points(rng, 1)[0]
        assert abs(d_omega(fubini_study(2), p, *rng.normal(size=(3, 4)))) < 1e-8
    vals = [d_omega(hopf(2), [1, 0], e[a], e[b], e[c]) for a in range(4) for b in range(4) for c in range(4)]
    assert max(abs(v) for v in vals) > 0.1
    # symbolic exterior derivative of the real 2-form agrees
    o = oracle("hopf", 2)
    assert np.allclose(o.d_omega(np.array([1.0, 0, 0, 0])).ravel(), vals, atol=1e-12)


def test_d_omega_totally_antisymmetric():
    from bismut.chart import d_omega_tensor

    t = d_omega_tensor(hopf(2), np.array([0.6 + 0.2j, -0.4j]))
    assert np.allclose(t, -np.swapaxes(t, 0, 1), atol=1e-13)
    assert np.allclose(t, -np.swapaxes(t, 1, 2), atol=1e-13)


def test_registry_tags_and_errors():
    m = registry("flat", n=3)
    assert m.kahler_expected and m.balanced_expected
    h = registry("hopf", n=2)
    assert not h.kahler_expected and not h.balanced_expected
    assert h.contains(np.array([0.1, 0])) and h.contains(np.array([10, 0]))
    assert not h.contains(np.array([0.09, 0])) and not h.contains(np.array([10.5, 0]))
    fs = registry("fubini_study", n=2)
    assert fs.kahler_expected and fs.balanced_expected
    p2 = registry("fs_perturbed", n=2, eps=0.1)
    assert not p2.kahler_expected and not p2.balanced_expected
    with pytest.raises(UnknownModel):
        registry("sphere")
    with pytest.raises(BadParams):
        registry("fs_perturbed", n=1, eps=0.5)
    with pytest.raises(BadParams):
        registry("hopf", k=3)


def test_fs_perturbed_positive_on_domain_sample():
    model = fs_perturbed(1, 0.1)
    rng = np.random.default_rng(11)
    r = 0.999 * np.sqrt(rng.uniform(size=100))
    z = (r * np.exp(2j * np.pi * rng.uniform(size=100)))[:, None]
    assert np.all(np.linalg.eigvalsh(model.h(z))[:, 0] > 0)


def test_parse_model_spec():
    m = parse_model_spec("fubini_study(1, 2.0)")
    assert m.n == 1 and m.hsc_constant == 1.0
    assert parse_model_spec("hopf").n == 2
