"""Asymptotic mean, variance and power of G_1 - Tc_p^2 s1_hat^2 under a VMA(1) alternative.

Under x_t = A0 z_t + A1 z_{t-1} everything is a trace polynomial in

    S0 = A0' A0,   S1 = A1' A1,   S01 = A0' A1.

Remainder terms of smaller order are dropped.  The power formula uses
the T -> infinity limits of the mean and variance evaluated at the given
(p, T): terms of the mean that vanish in the limit (orders p/T^2 and
1/T^2) are left out there, while ``prop24_g11_law`` reports the full
finite-T mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .distributions import normal_sf, normal_upper_quantile
from .errors import DegenerateVarianceError, DomainError


@dataclass(frozen=True)
class VmaSpec:
    A0: np.ndarray
    A1: np.ndarray

    def __post_init__(self):
        A0 = np.asarray(self.A0, dtype=float)
        A1 = np.asarray(self.A1, dtype=float)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1] or A0.shape != A1.shape:
            raise DomainError("A0 and A1 must be square matrices of equal size")
        if not (np.all(np.isfinite(A0)) and np.all(np.isfinite(A1))):
            raise DomainError("coefficient matrices must be finite")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "A1", A1)

    @property
    def p(self) -> int:
        return self.A0.shape[0]

    @cached_property
    def S0(self) -> np.ndarray:
        return self.A0.T @ self.A0

    @cached_property
    def S1(self) -> np.ndarray:
        return self.A1.T @ self.A1

    @cached_property
    def S01(self) -> np.ndarray:
        return self.A0.T @ self.A1

    @classmethod
    def model_v(cls, p: int, a: float) -> "VmaSpec":
        return cls(np.eye(p), a * np.eye(p))


@dataclass(frozen=True)
class PowerPrediction:
    mu_G11: float
    sigma_G11: float
    xi0: float
    beta: float


def _tr(M) -> float:
    return float(np.trace(M))


def _dd(A, B) -> float:
    """Tr(D(A) D(B))."""
    return float(np.diag(A) @ np.diag(B))


def trace_polynomials(spec: VmaSpec) -> dict[str, float]:
    """Every trace that enters the alternative moments, keyed by a readable name."""
    S0, S1, S01 = spec.S0, spec.S1, spec.S01
    S = S0 + S1
    P = S0 @ S1
    St = S01.T
    return {
        "Tr(S0+S1)": _tr(S),
        "Tr((S0+S1)^2)": _tr(S @ S),
        "TrD2(S0+S1)": _dd(S, S),
        "Tr(S0 S1)": _tr(P),
        "TrD(S0)D(S1)": _dd(S0, S1),
        "Tr(S0 S1 (S0+S1))": _tr(P @ S),
        "TrD(S0 S1)D(S0+S1)": _dd(P, S),
        "Tr(S0^2+S1^2)": _tr(S0 @ S0 + S1 @ S1),
        "Tr((S0 S1)^2)": _tr(P @ P),
        "TrD2(S0 S1)": _dd(P, P),
        "Tr(S01)": _tr(S01),
        "Tr(S01 S01')": _tr(S01 @ St),
        "Tr(S01 S1)": _tr(S01 @ S1),
        "Tr(S01 S0)": _tr(S01 @ S0),
        "Tr(S01' S01 S0)": _tr(St @ S01 @ S0),
        "Tr(S01 S01' S1)": _tr(S01 @ St @ S1),
        "Tr(S0^2 S01')": _tr(S0 @ S0 @ St),
        "Tr(S1^2 S01)": _tr(S1 @ S1 @ S01),
        "Tr(S1 S01 S0)": _tr(S1 @ S01 @ S0),
        "Tr(S01' S01 S0^2 + S01 S01' S1^2 + 2 S01' S1 S01 S0)":
            _tr(St @ S01 @ S0 @ S0 + S01 @ St @ S1 @ S1 + 2 * St @ S1 @ S01 @ S0),
        "Tr(S01 (S0+S1))": _tr(S01 @ S),
        "TrD(S01)D(S0+S1)": _dd(S01, S),
        "Tr(S01 S01' S01' S01)": _tr(S01 @ St @ St @ S01),
        "Tr(S01 S01' S01')": _tr(S01 @ St @ St),
        "Tr(S01^2)": _tr(S01 @ S01),
        "TrD2(S01)": _dd(S01, S01),
        "Tr(S0 S1 S01)": _tr(P @ S01),
        "TrD(S0 S1)D(S01)": _dd(P, S01),
    }


def _common_sigma_terms(t: dict, T: int, k: float) -> float:
    """Terms shared by sigma_G^2 and sigma_{G11}^2."""
    return (2 / T**2 * t["Tr(S0^2+S1^2)"] ** 2
            + 6 / T**2 * t["Tr(S0 S1)"] ** 2
            + 4 / T * (2 * t["Tr((S0 S1)^2)"] + k * t["TrD2(S0 S1)"])
            + 8 / T**2 * t["Tr(S01 S01')"] * t["Tr(S0^2+S1^2)"]
            + 16 / T**2 * t["Tr(S01 S1)"] * t["Tr(S01 S0)"]
            + 16 / T**2 * t["Tr(S01)"] * (t["Tr(S0^2 S01')"] + t["Tr(S1^2 S01)"] + 2 * t["Tr(S1 S01 S0)"])
            + 4 / T * t["Tr(S01' S01 S0^2 + S01 S01' S1^2 + 2 S01' S1 S01 S0)"]
            + 16 / T**3 * t["Tr(S01)"] ** 2 * t["Tr((S0+S1)^2)"]
            + 4 / T * t["Tr(S01 S01' S01' S01)"]
            + 12 / T**2 * t["Tr(S01 S01')"] ** 2
            + 16 / T**2 * t["Tr(S01)"] * t["Tr(S01 S01' S01')"]
            + 16 / T**3 * t["Tr(S01)"] ** 2 * (t["Tr(S01^2)"] + 2 * t["Tr(S01 S01')"] + k * t["TrD2(S01)"])
            + 8 / T**2 * t["Tr(S01 S1)"] ** 2
            + 8 / T**2 * t["Tr(S01 S0)"] ** 2
            + 16 / T**2 * t["Tr(S01)"] * (2 * t["Tr(S0 S1 S01)"] + k * t["TrD(S0 S1)D(S01)"]))


def theorem23_moments(spec: VmaSpec, T: int, nu4: float = 3.0) -> dict[str, float]:
    """Joint asymptotic moments of (G_1, T c_p^2 s1_hat^2) under the VMA(1) model."""
    t = trace_polynomials(spec)
    k = nu4 - 3
    tr = t["Tr(S0+S1)"]
    sq = 2 * t["Tr((S0+S1)^2)"] + k * t["TrD2(S0+S1)"]
    cross1 = 2 * t["Tr(S0 S1 (S0+S1))"] + k * t["TrD(S0 S1)D(S0+S1)"]
    cross01 = t["Tr(S01' S01 S0)"] + t["Tr(S01 S01' S1)"]
    tr01 = t["Tr(S01)"]
    mix01 = 2 * t["Tr(S01 (S0+S1))"] + k * t["TrD(S01)D(S0+S1)"]

    mu_G = (tr**2 / T + t["Tr(S0 S1)"] + 2 / T * tr01**2
            + 1 / T * (t["Tr(S0 S1)"] + k * t["TrD(S0)D(S1)"]))
    mu_S = tr**2 / T + 4 / T**2 * t["Tr(S01 S01')"] + 1 / T**2 * sq
    sigma_S2 = 4 / T**3 * tr**2 * sq + 16 / T**3 * tr**2 * t["Tr(S01 S01')"]
    sigma_G2 = (4 / T**3 * tr**2 * sq
                + 8 / T**2 * tr * cross1
                + 16 / T**2 * tr * cross01
                + 16 / T**3 * tr**2 * t["Tr(S01 S01')"]
                + 32 / T**3 * tr * tr01 * t["Tr(S01 (S0+S1))"]
                + 16 / T**3 * tr01 * tr * mix01
                + _common_sigma_terms(t, T, k))
    sigma_GS = (4 / T**3 * tr**2 * sq
                + 4 / T**2 * tr * cross1
                + 8 / T**2 * tr * cross01
                + 16 / T**3 * tr**2 * t["Tr(S01 S01')"]
                + 8 / T**3 * tr01 * tr * mix01
                + 16 / T**3 * tr * tr01 * t["Tr(S01 (S0+S1))"])
    return {"mu_G": mu_G, "mu_S": mu_S, "sigma_G2": sigma_G2, "sigma_S2": sigma_S2, "sigma_GS": sigma_GS}


def _mu_g11_limit(t: dict, T: int, k: float) -> float:
    return (t["Tr(S0 S1)"] + 2 / T * t["Tr(S01)"] ** 2
            + 1 / T * (t["Tr(S0 S1)"] + k * t["TrD(S0)D(S1)"]))


def prop24_g11_law(spec: VmaSpec, T: int, nu4: float = 3.0) -> tuple[float, float]:
    """(mu_G11, sigma_G11) for G_1 - T c_p^2 s1_hat^2 with the full finite-T mean."""
    t = trace_polynomials(spec)
    k = nu4 - 3
    mu = (_mu_g11_limit(t, T, k)
          - 4 / T**2 * t["Tr(S01 S01')"]
          - 1 / T**2 * (2 * t["Tr((S0+S1)^2)"] + k * t["TrD2(S0+S1)"]))
    var = _common_sigma_terms(t, T, k)
    return mu, math.sqrt(var) if var > 0 else 0.0


def xi0(spec: VmaSpec, T: int) -> float:
    t = trace_polynomials(spec)
    return math.sqrt(2) * (t["Tr(S0^2+S1^2)"] / T + 2 / T * t["Tr(S01 S01')"] + 2 / T**2 * t["Tr(S01)"] ** 2)


def power_beta(spec: VmaSpec, T: int, nu4: float = 3.0, alpha: float = 0.05) -> PowerPrediction:
    """Asymptotic power of the G_{1,1} test: P(Z > Z_a xi0/sigma - mu/sigma)."""
    t = trace_polynomials(spec)
    k = nu4 - 3
    var = _common_sigma_terms(t, T, k)
    if not var > 0:
        raise DegenerateVarianceError("sigma_G11 is not positive")
    sigma = math.sqrt(var)
    mu = _mu_g11_limit(t, T, k)
    x0 = xi0(spec, T)
    za = normal_upper_quantile(alpha)
    if t["Tr(S0 S1)"] == 0 and t["Tr(S01 S01')"] == 0:
        # null model: the limiting statistic has mean 0 and scale xi0
        beta = float(alpha)
    else:
        beta = float(normal_sf(za * x0 / sigma - mu / sigma))
    return PowerPrediction(mu_G11=mu, sigma_G11=sigma, xi0=x0, beta=beta)
