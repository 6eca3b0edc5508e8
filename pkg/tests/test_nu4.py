import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from hdwnoise import nu4 as nu4mod
from hdwnoise.errors import DomainError, InfeasibleDimensionError, SingularCovarianceError
from hdwnoise.nu4 import (SplitConfig, calibrate_uv, estimate_nu4, fisher_eigenvalues, lss_statistic,
                          simulate_lss, validate_wachter)

TF = nu4mod.DEFAULT_TEST_FUNCTIONS


def gauss(p, T, seed=0):
    return np.random.default_rng(seed).standard_normal((p, T))


def test_duplicate_halves_give_unit_eigenvalues():
    Y = gauss(5, 30)
    lam = fisher_eigenvalues(np.hstack([Y, Y]), np.arange(60), 30)
    assert np.allclose(lam, 1.0, atol=1e-10)


def test_scalar_case_is_variance_ratio():
    x = gauss(1, 40, 1)
    perm = np.random.default_rng(2).permutation(40)
    a, b = x[0, perm[:15]], x[0, perm[15:]]
    lam = fisher_eigenvalues(x, perm, 15)
    assert lam[0] == pytest.approx(np.mean(b**2) / np.mean(a**2), rel=1e-12)


def test_fisher_spectrum_free_of_sigma():
    X = gauss(8, 100, 3)
    A = np.random.default_rng(4).standard_normal((8, 8)) + 2 * np.eye(8)
    perm = np.random.default_rng(5).permutation(100)
    lam = fisher_eigenvalues(X, perm, 50)
    assert np.allclose(fisher_eigenvalues(A @ X, perm, 50), lam, rtol=1e-8)
    assert np.all(lam > 0)


def test_fisher_errors():
    with pytest.raises(InfeasibleDimensionError):
        fisher_eigenvalues(gauss(10, 30), np.arange(30), 10)
    with pytest.raises(DomainError):
        fisher_eigenvalues(gauss(2, 30), np.arange(29), 10)
    X = gauss(3, 40)
    X[2] = X[1]
    with pytest.raises(SingularCovarianceError):
        fisher_eigenvalues(X, np.arange(40), 20)


def test_lss_examples():
    assert lss_statistic(np.ones(7), 1, 1) == pytest.approx(7 * math.log(2))
    assert lss_statistic([math.e - 2.0], 2.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        lss_statistic([-3.0], 1.0, 1.0)


def test_split_config_validation():
    with pytest.raises(DomainError):
        SplitConfig(test_functions=((1, -1),))
    with pytest.raises(DomainError):
        SplitConfig(calibration_reps=10)
    with pytest.raises(DomainError):
        SplitConfig(B=0)


def test_calibration_deterministic():
    a = calibrate_uv(5, 40, 40, TF, 60, seed=3)
    nu4mod._calibrate_cached.cache_clear()
    b = calibrate_uv(5, 40, 40, TF, 60, seed=3)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    c = calibrate_uv(5, 40, 40, TF, 60, seed=3, threads=3)
    assert np.array_equal(a.u, c.u)


@pytest.fixture(scope="module")
def cal20():
    return calibrate_uv(20, 100, 100, TF, 2000, seed=11)


def test_gaussian_means_match_calibration(cal20):
    S = simulate_lss("gaussian", 20, 100, 100, TF, 200, seed=99)
    se = S.std(axis=0, ddof=1) / math.sqrt(200)
    assert np.all(np.abs(S.mean(axis=0) - cal20.predict(3.0)) < 3 * np.hypot(se, cal20.gaussian_se))


def test_out_of_sample_gamma_and_collinearity(cal20):
    n = 4000
    S = simulate_lss("gamma", 20, 100, 100, TF, n, seed=12)
    m = S.mean(axis=0)
    se = S.std(axis=0, ddof=1) / math.sqrt(n)
    # prediction error combines the Gamma MC error and the calibration error
    pred_se = np.sqrt(se**2 + (1.75 * cal20.gaussian_se) ** 2 + (0.75 * cal20.rademacher_se) ** 2)
    assert np.all(np.abs(m - cal20.predict(4.5)) < 3 * pred_se)


def test_estimates_by_law():
    cfg = SplitConfig(seed=5)
    draws = {
        "gaussian": lambda r: r.standard_normal((20, 200)),
        "gamma": lambda r: r.gamma(4.0, 0.5, (20, 200)) - 2.0,
        "rademacher": lambda r: r.integers(0, 2, (20, 200)) * 2.0 - 1.0,
    }
    means = {}
    for law, draw in draws.items():
        est = [estimate_nu4(draw(np.random.default_rng(1000 + s)), cfg) for s in range(40)]
        means[law] = (np.mean([e.nu4_hat for e in est]), np.mean([e.diagnostics["unclamped"] for e in est]))
    assert 2.7 <= means["gaussian"][0] <= 3.3
    assert 4.0 <= means["gamma"][0] <= 5.0
    assert 0.8 <= means["rademacher"][1] <= 1.3


def test_estimate_deterministic_and_shapes():
    X = gauss(10, 100, 8)
    cfg = SplitConfig(B=5, seed=2, calibration_reps=200)
    a, b = estimate_nu4(X, cfg), estimate_nu4(X, cfg)
    assert a.nu4_hat == b.nu4_hat and a.per_split == b.per_split
    assert len(a.per_split) == 5 and len(a.diagnostics["residual_norms"]) == 5
    assert a.nu4_hat >= 1


def test_estimate_errors():
    with pytest.raises(InfeasibleDimensionError):
        estimate_nu4(gauss(50, 100))
    with pytest.raises(DomainError):
        estimate_nu4(gauss(5, 100) + 1j)


def _shifted(monkeypatch, shift):
    orig = nu4mod.calibrate_uv

    def fake(*args, **kw):
        cal = orig(*args, **kw)
        return replace(cal, u=cal.u - shift * cal.v)
    monkeypatch.setattr(nu4mod, "calibrate_uv", fake)


def test_clamp_at_one(monkeypatch):
    _shifted(monkeypatch, -100.0)
    est = estimate_nu4(gauss(5, 60), SplitConfig(B=3, calibration_reps=100))
    assert est.nu4_hat == 1.0 and est.diagnostics["unclamped"] < 1


def test_warns_when_large(monkeypatch):
    _shifted(monkeypatch, 100.0)
    with pytest.warns(RuntimeWarning):
        est = estimate_nu4(gauss(5, 60), SplitConfig(B=3, calibration_reps=100))
    assert est.nu4_hat > 50


@pytest.mark.parametrize("c1,c2", [(0.2, 0.2), (0.5, 0.3), (0.1, 0.8), (1.0, 0.5), (1.5, 0.5), (3.0, 0.1)])
def test_wachter_normalization(c1, c2):
    assert validate_wachter(c1, c2).mass() == pytest.approx(1.0, abs=1e-6)


def test_wachter_endpoints():
    w = validate_wachter(0.2, 0.2)
    assert (w.a, w.b) == pytest.approx((0.25, 4.0))
    assert w.atom == 0.0
    assert validate_wachter(2.0, 0.5).atom == pytest.approx(0.5)
    with pytest.raises(DomainError):
        validate_wachter(0.5, 1.0)


@pytest.mark.parametrize("T1,T2", [(1000, 1000), (500, 2000), (2000, 500)])
def test_wachter_matches_fisher_esd_p200(T1, T2):
    X = gauss(200, T1 + T2, T1)
    lam = fisher_eigenvalues(X, np.arange(T1 + T2), T1)
    w = validate_wachter(200 / T2, 200 / T1)
    assert stats.kstest(lam, w.cdf).statistic < 0.05


def test_wachter_expected_esd_p20():
    lam = np.concatenate([fisher_eigenvalues(gauss(20, 200, s), np.arange(200), 100) for s in range(100)])
    assert stats.kstest(lam, validate_wachter(0.2, 0.2).cdf).statistic < 0.1
