"""Split-sample estimation of the innovation fourth moment nu4.

The time index is split at random into halves of sizes T1 and T2, giving
sample covariances S1 and S2 and the Fisher matrix F = S1^{-1} S2.  Its
spectrum does not depend on Sigma_0, and linear spectral statistics

    S_k = sum_j log(a_k + b_k lambda_j)

have means that are affine in nu4:  E S_k = u'_k + v_k nu4.  The
constants (u'_k, v_k) are calibrated by simulation from Gaussian
(nu4 = 3) and Rademacher (nu4 = 1) draws at the same (p, T1, T2).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from .core import as_series
from .errors import DomainError, InfeasibleDimensionError, SingularCovarianceError
from .rng import stream

DEFAULT_TEST_FUNCTIONS = ((1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (3.0, 1.0), (1.0, 3.0))
NU4_WARN = 50.0
_SINGULAR_RATIO = 1e-12

# RNG namespaces inside one seed
_NS_CALIBRATION = 0
_NS_SPLIT = 1


@dataclass(frozen=True)
class SplitConfig:
    B: int = 20
    T1: int | None = None
    test_functions: tuple = DEFAULT_TEST_FUNCTIONS
    calibration_reps: int = 2000
    seed: int = 0
    weighting: str = "gls"
    threads: int = 1

    def __post_init__(self):
        tf = tuple((float(a), float(b)) for a, b in self.test_functions)
        if not tf:
            raise DomainError("need at least one test function")
        if any(not (a > 0 and b > 0) for a, b in tf):
            raise DomainError("test function coefficients must be positive")
        object.__setattr__(self, "test_functions", tf)
        if self.B < 1:
            raise DomainError("B must be >= 1")
        if self.calibration_reps < 50:
            raise DomainError("calibration_reps must be >= 50")
        if self.weighting not in ("gls", "ols"):
            raise DomainError("weighting must be 'gls' or 'ols'")
        if self.weighting == "gls" and len(tf) < 2:
            object.__setattr__(self, "weighting", "ols")

    def halves(self, T: int) -> tuple[int, int]:
        T1 = T // 2 if self.T1 is None else int(self.T1)
        return T1, T - T1


@dataclass(frozen=True)
class Calibration:
    """Per-k intercepts u'_k, slopes v_k and regression weights for nu4."""

    p: int
    T1: int
    T2: int
    test_functions: tuple
    u: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    gaussian_cov: np.ndarray
    gaussian_se: np.ndarray
    rademacher_se: np.ndarray
    reps: int

    def predict(self, nu4: float) -> np.ndarray:
        return self.u + self.v * nu4

    def solve(self, S: np.ndarray) -> float:
        return float((np.asarray(S) - self.u) @ self.weights)

    def rows(self) -> list[dict]:
        return [{"k": k, "a": a, "b": b, "u_prime": float(self.u[k]), "v": float(self.v[k]),
                 "weight": float(self.weights[k])}
                for k, (a, b) in enumerate(self.test_functions)]


@dataclass
class Nu4Estimate:
    nu4_hat: float
    per_split: list[float]
    diagnostics: dict = field(default_factory=dict)


def fisher_eigenvalues(x, split, T1: int) -> np.ndarray:
    """Eigenvalues of S1^{-1} S2 for the halves split[:T1] and split[T1:]."""
    ts = as_series(x)
    if ts.is_complex:
        raise DomainError("nu4 estimation is implemented for real data only")
    X = ts.data
    p, T = ts.p, ts.T
    idx = np.asarray(split)
    if idx.shape != (T,) or not np.array_equal(np.sort(idx), np.arange(T)):
        raise DomainError("split must be a permutation of range(T)")
    T2 = T - T1
    if not (0 < T1 < T) or p >= min(T1, T2):
        raise InfeasibleDimensionError(f"need p < min(T1, T2); got p={p}, T1={T1}, T2={T2}")
    X1, X2 = X[:, idx[:T1]], X[:, idx[T1:]]
    return _gen_eig(X1 @ X1.T / T1, X2 @ X2.T / T2)


def _gen_eig(S1: np.ndarray, S2: np.ndarray) -> np.ndarray:
    d1 = np.linalg.eigvalsh(S1)
    if d1[-1] <= 0 or d1[0] < _SINGULAR_RATIO * d1[-1]:
        raise SingularCovarianceError("S1 is numerically singular")
    # Cholesky-based symmetric-definite problem S2 v = lambda S1 v
    return linalg.eigh(S2, S1, eigvals_only=True)


def lss_statistic(eigenvalues, a: float, b: float) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    arg = a + b * lam
    if np.any(arg <= 0):
        raise DomainError("a + b*lambda must be positive")
    return float(np.sum(np.log(arg)))


def _lss_vector(lam: np.ndarray, tf) -> np.ndarray:
    return np.array([lss_statistic(lam, a, b) for a, b in tf])


def _draw(law: str, rng: np.random.Generator, shape) -> np.ndarray:
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "rademacher":
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    if law == "gamma":
        return rng.gamma(4.0, 0.5, size=shape) - 2.0
    raise DomainError(f"unknown law {law!r}")


LAW_CODES = {"gaussian": 0, "rademacher": 1, "gamma": 2}


def simulate_lss(law: str, p: int, T1: int, T2: int, test_functions, reps: int, seed: int,
                 threads: int = 1) -> np.ndarray:
    """reps x K matrix of S_k under i.i.d. innovations from ``law``.

    Replicate r uses its own stream keyed by (seed, law, r).
    """
    tf = tuple(test_functions)
    code = LAW_CODES[law]

    def one(r: int) -> np.ndarray:
        rng = stream(seed, _NS_CALIBRATION, code, r)
        z = _draw(law, rng, (p, T1 + T2))
        z1, z2 = z[:, :T1], z[:, T1:]
        return _lss_vector(_gen_eig(z1 @ z1.T / T1, z2 @ z2.T / T2), tf)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, range(reps)))
    else:
        rows = [one(r) for r in range(reps)]
    return np.array(rows)


@lru_cache(maxsize=32)
def _calibrate_cached(p, T1, T2, tf, reps, seed, threads) -> Calibration:
    if p >= min(T1, T2):
        raise InfeasibleDimensionError(f"need p < min(T1, T2); got p={p}, T1={T1}, T2={T2}")
    G = simulate_lss("gaussian", p, T1, T2, tf, reps, seed, threads)
    R = simulate_lss("rademacher", p, T1, T2, tf, reps, seed, threads)
    gm, rm = G.mean(axis=0), R.mean(axis=0)
    v = (gm - rm) / 2.0
    u = rm - v
    C = np.atleast_2d(np.cov(G.T))
    try:
        Ci_v = np.linalg.solve(C, v)
        w = Ci_v / (v @ Ci_v)
    except np.linalg.LinAlgError:
        w = v / (v @ v)
    return Calibration(p, T1, T2, tf, u, v, w, C, G.std(axis=0, ddof=1) / math.sqrt(reps),
                       R.std(axis=0, ddof=1) / math.sqrt(reps), reps)


def calibrate_uv(p: int, T1: int, T2: int, test_functions=DEFAULT_TEST_FUNCTIONS,
                 reps: int = 2000, seed: int = 0, weighting: str = "gls",
                 threads: int = 1) -> Calibration:
    """Monte Carlo intercepts and slopes of E S_k = u'_k + v_k nu4.

    With ``weighting="gls"`` the per-split solve uses weights
    C^{-1} v / (v' C^{-1} v), C the Gaussian covariance of (S_k); with
    ``"ols"`` it is plain least squares v / (v'v).
    """
    if reps < 50:
        raise DomainError("reps must be >= 50")
    tf = tuple((float(a), float(b)) for a, b in test_functions)
    cal = _calibrate_cached(int(p), int(T1), int(T2), tf, int(reps), int(seed), max(1, int(threads)))
    if weighting == "ols":
        cal = replace(cal, weights=cal.v / (cal.v @ cal.v))
    elif weighting != "gls":
        raise DomainError("weighting must be 'gls' or 'ols'")
    return cal


def estimate_nu4(x, cfg: SplitConfig | None = None) -> Nu4Estimate:
    """Average of per-split regression estimates over B random splits, clamped at 1."""
    cfg = cfg or SplitConfig()
    ts = as_series(x)
    if ts.is_complex:
        raise DomainError("nu4 estimation is implemented for real data only")
    p, T = ts.p, ts.T
    if 2 * p >= T:
        raise InfeasibleDimensionError(
            f"nu4 estimation needs p < T/2 (p={p}, T={T}); use the Gq1 test instead")
    T1, T2 = cfg.halves(T)
    if p >= min(T1, T2):
        raise InfeasibleDimensionError(f"need p < min(T1, T2); got p={p}, T1={T1}, T2={T2}")
    cal = calibrate_uv(p, T1, T2, cfg.test_functions, cfg.calibration_reps, cfg.seed,
                       cfg.weighting, cfg.threads)
    per_split, resid = [], []
    for b in range(cfg.B):
        perm = stream(cfg.seed, _NS_SPLIT, b).permutation(T)
        S = _lss_vector(fisher_eigenvalues(ts, perm, T1), cal.test_functions)
        nu = cal.solve(S)
        per_split.append(nu)
        resid.append(float(np.linalg.norm(S - cal.predict(nu))))
    raw = float(np.mean(per_split))
    nu4_hat = max(raw, 1.0)
    if nu4_hat > NU4_WARN:
        warnings.warn(f"nu4 estimate {nu4_hat:.3g} exceeds {NU4_WARN:g}; heavy tails or misspecification",
                      RuntimeWarning, stacklevel=2)
    return Nu4Estimate(nu4_hat, per_split, {"unclamped": raw, "residual_norms": resid,
                                            "T1": T1, "T2": T2, "weighting": cfg.weighting})


@dataclass(frozen=True)
class WachterLaw:
    """Limiting spectral law of S1^{-1} S2 with c1 = p/T2 and c2 = p/T1.

    For c1 > 1 the law has an atom of mass 1 - 1/c1 at zero; ``density``
    covers the continuous part only.
    """

    c1: float
    c2: float
    a: float
    b: float
    atom: float
    density: Callable[[np.ndarray], np.ndarray]

    def cdf(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        for i, xx in enumerate(xs):
            if xx < 0:
                out[i] = 0.0
            elif xx <= self.a:
                out[i] = self.atom
            elif xx >= self.b:
                out[i] = 1.0
            else:
                out[i] = self.atom + integrate.quad(self.density, self.a, xx, limit=200)[0]
        return out

    def mass(self) -> float:
        return self.atom + integrate.quad(self.density, self.a, self.b, epsabs=1e-13, limit=200)[0]


def validate_wachter(c1: float, c2: float) -> WachterLaw:
    c1, c2 = float(c1), float(c2)
    if not (c1 > 0 and 0 < c2 < 1):
        raise DomainError("need c1 > 0 and 0 < c2 < 1")
    h = math.sqrt(c1 + c2 - c1 * c2)
    a = (1 - h) ** 2 / (1 - c2) ** 2
    b = (1 + h) ** 2 / (1 - c2) ** 2

    def density(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (1 - c2) * np.sqrt(np.clip((b - x) * (x - a), 0.0, None)) / (2 * np.pi * x * (c1 + c2 * x))
        return np.where((x > a) & (x < b), f, 0.0)

    return WachterLaw(c1, c2, a, b, max(0.0, 1.0 - 1.0 / c1), density)
