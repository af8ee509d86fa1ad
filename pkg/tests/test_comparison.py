import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from bismut.comparison import (
    ModelSpace,
    default_directions,
    estimate_K,
    laplacian_comparison_check,
    laplacian_distance,
    myers_diameter_experiment,
    sn_k,
    volume_density,
)
from bismut.errors import BeyondInjectivityBound, InconclusiveK, PoleError
from bismut.models import flat, fubini_study, hopf


def test_sn_examples():
    assert abs(sn_k(1.0, np.pi / 2)[0] - 1) < 1e-15
    assert sn_k(0.0, 0.7)[0] == 0.7
    assert abs(sn_k(-1.0, 1.0)[0] - 1.1752011936438014) < 1e-15


def test_sn_continuous_at_zero_curvature():
    t = np.linspace(0, 2, 9)
    for K in (1e-8, -1e-8):
        s, ds = sn_k(K, t)
        assert np.max(np.abs(s - t)) < 1e-7
        assert np.max(np.abs(ds - 1)) < 1e-7


@settings(max_examples=50, deadline=None)
@given(st.floats(-4, 4), st.floats(0, 1.5))
def test_sn_first_integral(K, t):
    # f'' + K f = 0 with f(0)=0, f'(0)=1 keeps f'^2 + K f^2 = 1
    s, ds = sn_k(K, t)
    assert abs(ds**2 + K * s**2 - 1) <= 1e-10 * max(1.0, ds**2)


def test_sn_matches_ode_solution():
    t = np.linspace(0, 1.5, 16)
    for K in (2.0, 0.0, -0.7):
        sol = solve_ivp(lambda _, y: [y[1], -K * y[0]], (0, 1.5), [0.0, 1.0], t_eval=t, rtol=1e-12, atol=1e-14)
        s, ds = sn_k(K, t)
        assert np.max(np.abs(sol.y[0] - s)) < 1e-10
        assert np.max(np.abs(sol.y[1] - ds)) < 1e-10


def test_quotient_pole():
    with pytest.raises(PoleError):
        ModelSpace(1.0).ratio(0.0)
    with pytest.raises(PoleError):
        ModelSpace(1.0).ratio(np.pi)
    assert abs(ModelSpace(0.0).laplacian_bound(2, 0.5) - 6.0) < 1e-15


def test_flat_laplacian_and_density():
    assert abs(laplacian_distance(flat(1), [0j], [1.0, 0.0], 0.5) - 2.0) < 1e-6
    rho = np.array([0.2, 0.7, 1.3])
    for n in (1, 2):
        d = default_directions(n, 4)[:2]
        lap = laplacian_distance(flat(n), np.zeros(n), d[:, None, :], rho[None, :])
        assert np.max(np.abs(lap - (2 * n - 1) / rho)) < 1e-6
        lam = volume_density(flat(n), np.zeros(n), rho[None, :], d[:, None, :], 0.0)
        assert np.max(np.abs(lam - 1)) < 1e-12


def test_fs_laplacian_saturates_model_space():
    f = fubini_study(1)
    K = f.hsc_constant
    rho = np.array([0.3, 0.6, 1.0])
    lap, trace, _ = laplacian_distance(f, [0.2 + 0.1j], [0.6, 0.8], rho, details=True)
    want = ModelSpace(K).laplacian_bound(1, rho)
    assert np.max(np.abs(lap - want)) < 1e-6
    assert np.max(np.abs(trace - want)) < 1e-6
    lam = volume_density(f, [0.2 + 0.1j], rho, [0.6, 0.8], K)
    assert np.max(np.abs(lam - 1)) < 1e-4


def test_volume_density_limit_and_monotonicity():
    f = fubini_study(1)
    lam0 = volume_density(f, [0j], 1e-2, default_directions(1, 6), 1.0)
    assert np.max(np.abs(lam0 - 1)) < 1e-3
    rho = np.linspace(0.1, 1.0, 8)
    lam = volume_density(f, [0j], rho, [1.0, 0.0], 1.0)  # K below the model value 2
    assert np.all(np.diff(lam) < 0)


def test_comparison_check_equality_and_negative_control():
    rho = np.linspace(0.1, 1.0, 5)
    dirs = default_directions(1, 4)
    ok = laplacian_comparison_check(fubini_study(1), [0j], 2.0, rho, dirs)
    assert ok.verdicts["laplacian_ok"] and ok.verdicts["lambda_monotone"] and ok.verdicts["lambda_limit_one"]
    assert abs(ok.verdicts["min_margin"]) < 1e-4
    assert ok.verdicts["max_abs_lambda_minus_one"] < 1e-4
    bad = laplacian_comparison_check(fubini_study(1), [0j], 2.2, rho, dirs)
    assert not bad.verdicts["laplacian_ok"]
    assert bad.verdicts["min_margin"] < 0
    fl = laplacian_comparison_check(flat(1), [0j], 0.0, rho, dirs)
    assert fl.verdicts["laplacian_ok"] and abs(fl.verdicts["min_margin"]) < 1e-6
    assert len(fl.samples) == len(rho) * len(dirs)


def test_injectivity_guard():
    with pytest.raises(BeyondInjectivityBound):
        laplacian_distance(fubini_study(1), [0j], [1.0, 0.0], 1.1)


def test_sobol_directions():
    d = default_directions(2)
    assert d.shape == (128, 4)
    assert np.all(np.isfinite(d))
    assert np.allclose(np.linalg.norm(d, axis=-1), 1)
    assert len(np.unique(np.round(d, 12), axis=0)) == 128
    assert np.allclose(default_directions(1, 4), [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_curvature_estimates():
    rng = np.random.default_rng(0)
    est = estimate_K(fubini_study(2), rng, samples=16)
    # FS with holomorphic sectional curvature 2 is Einstein with Ric = 3 = (2n-1) K, so K = 1
    assert abs(est.value - 1.0) < 1e-6
    assert abs(estimate_K(fubini_study(2), rng, 16, source="hsc").value - 2.0) < 1e-6
    with pytest.raises(InconclusiveK):
        estimate_K(flat(2), rng)
    with pytest.raises(InconclusiveK):
        estimate_K(hopf(2), rng)


def test_myers_synge_negative_above_critical_length():
    out = myers_diameter_experiment(fubini_study(1), K=2.0, config={"geodesics": 1, "diameter": False})
    assert out["status"] == "ok"
    assert out["length"] == pytest.approx(1.05 * math.pi / math.sqrt(2))
    case = out["cases"][0]
    assert case["myers_gap"] < 1e-5
    L, K = out["length"], 2.0
    assert abs(case["synge"] - (math.pi**2 / (2 * L) - K * L / 2)) < 1e-5
    assert out["myers_negative"] and out["synge_negative"]


def test_myers_not_applicable_on_flat():
    assert myers_diameter_experiment(flat(1))["status"] == "not_applicable"
    assert myers_diameter_experiment(flat(1), K=0.0)["status"] == "not_applicable"
