"""Hosking and Li-McLeod multivariate portmanteau tests.

Both use the truncated (non-circular) autocovariance

    C_tau = (1/T) sum_{t=tau+1..T} a_t a_{t-tau}'

and a chi-square reference law with p^2 (q - u - v) degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TestReport, as_series, TimeSeriesMatrix, _check_lag
from .distributions import chi2_sf, chi2_upper_quantile
from .errors import DomainError, InvalidLagError, SingularCovarianceError

# C0 counts as singular below this eigenvalue ratio
EIG_RATIO_FLOOR = 1e-10


@dataclass(frozen=True)
class PortmanteauInput:
    residuals: TimeSeriesMatrix
    q: int
    dof_adjust: int = 0

    def __post_init__(self):
        ts = as_series(self.residuals)
        object.__setattr__(self, "residuals", ts)
        if ts.is_complex:
            raise DomainError("portmanteau tests are implemented for real data only")
        if int(self.q) < 1:
            raise InvalidLagError("q must be >= 1")
        _check_lag(self.q, ts.T, "q")
        if self.dof_adjust < 0 or self.q - self.dof_adjust < 1:
            raise DomainError("need q - (u + v) >= 1")

    @property
    def dof(self) -> int:
        p = self.residuals.p
        return p * p * (int(self.q) - int(self.dof_adjust))


def autocov_truncated(x, tau: int) -> np.ndarray:
    ts = as_series(x)
    tau = _check_lag(tau, ts.T)
    X = ts.data
    return X[:, tau:] @ X[:, : ts.T - tau].conj().T / ts.T


def _whitener(C0: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of C0, refusing near-singular input."""
    w, V = np.linalg.eigh(C0)
    if w[-1] <= 0 or w[0] < EIG_RATIO_FLOOR * w[-1]:
        raise SingularCovarianceError(
            f"C0 is numerically singular (eigenvalue ratio {w[0] / w[-1] if w[-1] > 0 else 0:.3e})")
    return (V / np.sqrt(w)) @ V.T


def portmanteau_traces(x, q: int) -> np.ndarray:
    """Tr(C_tau' C0^{-1} C_tau C0^{-1}) for tau = 1..q."""
    ts = as_series(x)
    W = _whitener(autocov_truncated(ts, 0))
    out = np.empty(q)
    for tau in range(1, q + 1):
        R = W @ autocov_truncated(ts, tau) @ W
        out[tau - 1] = np.sum(R * R)
    return out


def hosking_statistic(x, q: int) -> float:
    ts = as_series(x)
    T = ts.T
    tr = portmanteau_traces(ts, q)
    return float(T**2 * np.sum(tr / (T - np.arange(1, q + 1))))


def li_mcleod_statistic(x, q: int) -> float:
    ts = as_series(x)
    T, p = ts.T, ts.p
    tr = portmanteau_traces(ts, q)
    return float(T * tr.sum() + p * p * q * (q + 1) / (2 * T))


def _chi2_report(name: str, stat: float, inp: PortmanteauInput, alpha: float) -> TestReport:
    dof = inp.dof
    crit = chi2_upper_quantile(alpha, dof)
    ts = inp.residuals
    return TestReport(
        test=name,
        statistic=stat,
        centering=0.0,
        scale=float(dof),
        z_or_chi2=stat,
        p_value=float(chi2_sf(stat, dof)),
        reject=bool(stat > crit),
        alpha=float(alpha),
        q=int(inp.q),
        params={"p": ts.p, "T": ts.T, "c_p": ts.c_p, "s1_hat": None, "s2_tilde": None,
                "s_d2_tilde": None, "nu4": None, "dof": dof, "critical_value": crit},
    )


def hosking(inp: PortmanteauInput, alpha: float = 0.05) -> TestReport:
    return _chi2_report("Hosking", hosking_statistic(inp.residuals, inp.q), inp, alpha)


def li_mcleod(inp: PortmanteauInput, alpha: float = 0.05) -> TestReport:
    return _chi2_report("LiMcLeod", li_mcleod_statistic(inp.residuals, inp.q), inp, alpha)


def diagnostics_moments(statistics, dof: float) -> dict[str, float]:
    """Relative errors (theory - empirical) / empirical of mean, variance and 95% quantile."""
    s = np.asarray(statistics, dtype=float)
    if s.size < 100:
        raise DomainError("need at least 100 samples")
    emp = {"mean": s.mean(), "variance": s.var(ddof=1), "q95": np.quantile(s, 0.95)}
    theo = {"mean": float(dof), "variance": 2.0 * dof, "q95": chi2_upper_quantile(0.05, dof)}
    return {k: (theo[k] - emp[k]) / emp[k] for k in emp}
