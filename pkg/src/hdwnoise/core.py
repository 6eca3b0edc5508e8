"""Sample autocovariances, the G_q statistic family and the three G-type tests.

Conventions
-----------
Data are p x T arrays: row i is a coordinate, column t is the observation
x_t.  Lagged autocovariances wrap the time index circularly,

    Sigma_tau = (1/T) sum_t x_t x_{t-tau}^*,   x_{t} = x_{t+T} for t <= 0,

and G_q = sum_{tau=1..q} ||Sigma_tau||_F^2.  Everywhere the limiting ratio
c = lim p/T enters a variance, the finite-sample c_p = p/T is plugged in.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .distributions import normal_sf, normal_upper_quantile
from .errors import DegenerateVarianceError, DomainError, InvalidLagError


@dataclass(frozen=True)
class TimeSeriesMatrix:
    """A p x T panel; column t is the observation at time t."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise DomainError(f"expected a 2-d array, got shape {arr.shape}")
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=False)
        else:
            arr = arr.astype(np.float64, copy=False)
        p, T = arr.shape
        if p < 1 or T < 2:
            raise DomainError(f"need p >= 1 and T >= 2, got p={p}, T={T}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("data contain non-finite entries")
        object.__setattr__(self, "data", arr)

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    @property
    def c_p(self) -> float:
        return self.p / self.T

    def demeaned(self) -> "TimeSeriesMatrix":
        """Copy with each coordinate centered over time.

        The tests assume E x_t = 0.  Demeaning introduces a rank-one
        dependence across time that shifts the null law of G_q by O(1/T)
        relative terms, so it is never applied implicitly.
        """
        return TimeSeriesMatrix(self.data - self.data.mean(axis=1, keepdims=True))


def as_series(x, demean: bool = False) -> TimeSeriesMatrix:
    ts = x if isinstance(x, TimeSeriesMatrix) else TimeSeriesMatrix(np.asarray(x))
    return ts.demeaned() if demean else ts


@dataclass(frozen=True)
class SpectralConstants:
    """Normalized trace characteristics of Sigma_0 plus nu4 and c_p."""

    s1: float
    s2: float
    s_d2: float
    nu4: float
    c_p: float

    def __post_init__(self):
        for name in ("s1", "s2", "s_d2", "c_p"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise DomainError(f"{name} must be positive and finite, got {val}")
        if not (self.nu4 >= 1 and math.isfinite(self.nu4)):
            raise DomainError(f"nu4 must be >= 1, got {self.nu4}")

    @classmethod
    def from_sigma(cls, sigma0, T: int, nu4: float = 3.0) -> "SpectralConstants":
        sigma0 = np.asarray(sigma0)
        p = sigma0.shape[0]
        d = np.real(np.diag(sigma0))
        return cls(
            s1=float(np.real(np.trace(sigma0))) / p,
            s2=float(np.sum(np.abs(sigma0) ** 2)) / p,
            s_d2=float(d @ d) / p,
            nu4=float(nu4),
            c_p=p / T,
        )

    @classmethod
    def identity(cls, p: int, T: int, nu4: float = 3.0) -> "SpectralConstants":
        return cls(1.0, 1.0, 1.0, float(nu4), p / T)


TEST_NAMES = ("Gq", "Gq1", "Gq1Star", "Hosking", "LiMcLeod")


@dataclass
class TestReport:
    """Outcome of one test.

    For the z-type tests ``z_or_chi2 = (statistic - centering) / scale``;
    for the chi-square tests ``z_or_chi2`` is the statistic itself and
    ``scale`` holds the degrees of freedom.
    """

    __test__ = False  # keep pytest from collecting this class

    test: str
    statistic: float
    centering: float
    scale: float
    z_or_chi2: float
    p_value: float
    reject: bool
    alpha: float
    q: int
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["reject"] = bool(self.reject)
        return out


def _check_lag(tau: int, T: int, what: str = "tau") -> int:
    if int(tau) != tau:
        raise InvalidLagError(f"{what} must be an integer")
    tau = int(tau)
    if tau < 0 or tau >= T:
        raise InvalidLagError(f"{what}={tau} outside [0, T) with T={T}")
    return tau


def autocov_circular(x, tau: int) -> np.ndarray:
    """Circular lag-tau sample autocovariance (1/T) sum_t x_t x_{t-tau}^*."""
    ts = as_series(x)
    tau = _check_lag(tau, ts.T)
    X = ts.data
    # column t of the rolled array is x_{t - tau} with wrap-around
    return X @ np.roll(X, tau, axis=1).conj().T / ts.T


def g_q(x, q: int) -> float:
    """G_q = sum of squared Frobenius norms of the first q lagged autocovariances."""
    ts = as_series(x)
    q = _check_lag(q, ts.T, "q")
    if q < 1:
        raise InvalidLagError("q must be >= 1")
    X = ts.data
    Xc = X.conj()
    total = 0.0
    for tau in range(1, q + 1):
        S = X @ np.roll(Xc, tau, axis=1).T
        total += float(np.vdot(S, S).real)
    return total / ts.T**2


def g_q_svd(x, q: int) -> float:
    """Same quantity through singular values; kept as a cross-check."""
    ts = as_series(x)
    return float(sum(np.sum(np.linalg.svd(autocov_circular(ts, tau), compute_uv=False) ** 2)
                     for tau in range(1, q + 1)))


@dataclass(frozen=True)
class Estimates:
    s1_hat: float
    s2_hat: float
    s2_tilde: float
    s_d2_tilde: float


def estimate_s1_s2(x) -> Estimates:
    """Plug-in estimators of s1, s2 and s_{d,2} from Sigma_0-hat."""
    ts = as_series(x)
    X = ts.data
    p, T = ts.p, ts.T
    # Tr(S0^2) = ||S0||_F^2; use whichever Gram matrix is smaller
    if p <= T:
        S0 = X @ X.conj().T / T
    else:
        S0 = X.conj().T @ X / T
    d = np.sum(np.abs(X) ** 2, axis=1) / T
    s1 = float(d.sum()) / p
    s2 = float(np.vdot(S0, S0).real) / p
    return Estimates(s1, s2, s2 - (p / T) * s1**2, float(d @ d) / p)


def sigma2_real(constants: SpectralConstants, q: int) -> float:
    """Limiting Var(G_q) for real data: 2qc^2 s2^2 + 4q^2c^3[(nu4-3)s1^2 s_d2 + 2 s1^2 s2]."""
    c, s1, s2, sd2, nu4 = constants.c_p, constants.s1, constants.s2, constants.s_d2, constants.nu4
    return (2 * q * c**2 * s2**2
            + 4 * q**2 * c**3 * (nu4 - 3) * s1**2 * sd2
            + 8 * q**2 * c**3 * s1**2 * s2)


def sigma2_complex(constants: SpectralConstants, q: int) -> float:
    """Limiting Var(G_q) for proper complex data: qc^2 s2^2 + 4q^2c^3 s1^2[(nu4-2)s_d2 + s2]."""
    c, s1, s2, sd2, nu4 = constants.c_p, constants.s1, constants.s2, constants.s_d2, constants.nu4
    return q * c**2 * s2**2 + 4 * q**2 * c**3 * s1**2 * ((nu4 - 2) * sd2 + s2)


def _z_report(name, stat, centering, var, alpha, q, params) -> TestReport:
    if not (var > 0) or not math.isfinite(var):
        raise DegenerateVarianceError(f"{name}: variance {var} is not positive")
    scale = math.sqrt(var)
    z = (stat - centering) / scale
    crit = normal_upper_quantile(alpha)
    return TestReport(
        test=name,
        statistic=float(stat),
        centering=float(centering),
        scale=scale,
        z_or_chi2=float(z),
        p_value=float(normal_sf(z)),
        reject=bool(z > crit),
        alpha=float(alpha),
        q=int(q),
        params=params,
    )


def _params(ts, est: Estimates | None, nu4) -> dict[str, Any]:
    out: dict[str, Any] = {"p": ts.p, "T": ts.T, "c_p": ts.c_p,
                           "s1_hat": None, "s2_tilde": None, "s_d2_tilde": None,
                           "nu4": None if nu4 is None else float(nu4)}
    if est is not None:
        out.update(s1_hat=est.s1_hat, s2_tilde=est.s2_tilde, s_d2_tilde=est.s_d2_tilde)
    return out


def test_gq_known_sigma(x, q: int, alpha: float, constants: SpectralConstants,
                        demean: bool = False) -> TestReport:
    """Reject when G_q - qTc_p^2 s1^2 > Z_alpha sigma(c_p).

    Complex input dispatches to the proper-complex variance.
    """
    ts = as_series(x, demean)
    stat = g_q(ts, q)
    c = ts.c_p
    if not math.isclose(constants.c_p, c, rel_tol=1e-12):
        constants = SpectralConstants(constants.s1, constants.s2, constants.s_d2, constants.nu4, c)
    centering = q * ts.T * c**2 * constants.s1**2
    var = sigma2_complex(constants, q) if ts.is_complex else sigma2_real(constants, q)
    params = _params(ts, None, constants.nu4)
    params.update(s1=constants.s1, s2=constants.s2, s_d2=constants.s_d2,
                  branch="complex" if ts.is_complex else "real")
    return _z_report("Gq", stat, centering, var, alpha, q, params)


def _require_real(ts: TimeSeriesMatrix, name: str):
    if ts.is_complex:
        raise DomainError(f"{name} is defined for real-valued data only")


def test_gq1(x, q: int, alpha: float, demean: bool = False) -> TestReport:
    """Feasible test: G_q - qTc_p^2 s1_hat^2 against Z_alpha * sqrt(2q) c_p s2_tilde."""
    ts = as_series(x, demean)
    _require_real(ts, "test_gq1")
    est = estimate_s1_s2(ts)
    if not est.s2_tilde > 0:
        raise DegenerateVarianceError(f"s2_tilde = {est.s2_tilde} is not positive")
    c = ts.c_p
    stat = g_q(ts, q)
    centering = q * ts.T * c**2 * est.s1_hat**2
    var = 2 * q * c**2 * est.s2_tilde**2
    return _z_report("Gq1", stat, centering, var, alpha, q, _params(ts, est, None))


def test_gq1_star(x, q: int, alpha: float, nu4_hat: float, demean: bool = False) -> TestReport:
    """G_{q,1} with the O(1/T) mean and variance corrections that involve nu4."""
    ts = as_series(x, demean)
    _require_real(ts, "test_gq1_star")
    nu4_hat = float(nu4_hat)
    if not math.isfinite(nu4_hat):
        raise DomainError("nu4_hat must be finite")
    est = estimate_s1_s2(ts)
    c, T = ts.c_p, ts.T
    k = 2 * est.s2_tilde + (nu4_hat - 3) * est.s_d2_tilde
    stat = g_q(ts, q)
    centering = q * T * c**2 * est.s1_hat**2 - q * c * k / T
    var = 2 * q * c**2 * est.s2_tilde**2 + q * c**2 * k**2 / T
    if not est.s2_tilde > 0:
        var = -1.0
    return _z_report("Gq1Star", stat, centering, var, alpha, q, _params(ts, est, nu4_hat))


# these names describe hypothesis tests, not unit tests
for _f in (test_gq_known_sigma, test_gq1, test_gq1_star):
    _f.__test__ = False
