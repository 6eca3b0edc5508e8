"""Exact finite-T null moments of G_q and p * s1_hat^2.

Notation: z has i.i.d. standardized components with raw moments
E z^k = nu_k, S = Sigma_0 and x_t = S^{1/2} z_t.  The building blocks are

    V1 = E z'Sz              V2 = E (z'Sz)^2
    V3 = E (z_t'S z_s)^2     V3' = E |z_t'S z_s|^2        (s != t)
    V4, V4'                  fourth moments of two lagged bilinear forms
    V5 = E (z'Sz)^3          V6 = E (z'Sz)^4
    V7 = nu3^2 * 1'D(S) S^2 D(S) 1

V5 is computed from the cumulant expansion of a cubic form.  The variance
of G_q includes the T-3 count of non-colliding time pairs, the cross-lag
covariance 2q(q-1)[Tr S^4 + b^2 Tr (SS^T)^2], and a nu3^2 term from lag
pairs (k, 2k).  Each of these was checked against brute-force
enumeration over time patterns; see tests/_exact_enumeration.py.

The complex branch (b < 1) covers V1..V4' and Var(G_q) for laws whose
mixed third moments vanish (e.g. circular Gaussian); V5..V7 and the
p * s1_hat^2 moments are real-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InsufficientMomentsError


@dataclass(frozen=True)
class InnovationMoments:
    """Raw moments of a standardized innovation component.

    ``b = |E z^2|^2`` (1 for real laws, 0 for proper complex laws).
    ``ez4bar_ez2sq`` stands for E(conj(z)^4) E^2(z^2), needed by V4 in the
    complex case; for real laws it equals nu4.
    """

    nu3: float | None = 0.0
    nu4: float = 3.0
    nu5: float | None = 0.0
    nu6: float | None = 15.0
    nu8: float | None = 105.0
    b: float = 1.0
    ez4bar_ez2sq: float | None = None

    def __post_init__(self):
        if not self.nu4 >= 1:
            raise DomainError("nu4 must be >= 1")
        if not 0.0 <= self.b <= 1.0:
            raise DomainError("b must lie in [0, 1]")

    @property
    def is_real(self) -> bool:
        return self.b == 1.0

    @property
    def kappa4(self) -> float:
        return self.nu4 - 3.0

    @classmethod
    def gaussian(cls) -> "InnovationMoments":
        return cls(0.0, 3.0, 0.0, 15.0, 105.0, 1.0)

    @classmethod
    def complex_gaussian(cls) -> "InnovationMoments":
        # (N + iN)/sqrt(2): E|z|^4 = 2, E z^2 = 0
        return cls(None, 2.0, None, None, None, 0.0, 0.0)

    @classmethod
    def rademacher(cls) -> "InnovationMoments":
        return cls(0.0, 1.0, 0.0, 1.0, 1.0, 1.0)

    @classmethod
    def gamma_ii(cls) -> "InnovationMoments":
        """Gamma(4, scale 0.5) - 2: mean 0, variance 1, nu4 = 4.5."""
        shape, scale, shift = 4, 0.5, 2.0
        gam = [math.prod(shape + i for i in range(k)) * scale**k for k in range(9)]
        raw = [sum(math.comb(k, j) * gam[j] * (-shift) ** (k - j) for j in range(k + 1)) for k in range(9)]
        return cls.from_raw(raw)

    @classmethod
    def from_raw(cls, raw) -> "InnovationMoments":
        """From raw moments [1, 0, 1, nu3, nu4, nu5, nu6, nu7, nu8]."""
        raw = list(raw)
        return cls(float(raw[3]), float(raw[4]), float(raw[5]), float(raw[6]), float(raw[8]), 1.0)

    def _need(self, *names: str):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise InsufficientMomentsError(f"missing innovation moments: {', '.join(missing)}")


class VMoments(NamedTuple):
    V1: float
    V2: float
    V3: float
    V3p: float
    V4: float
    V4p: float
    V5: float | None
    V6: float | None
    V7: float | None


def _tr(M) -> float:
    return float(np.real(np.trace(M)))


def _dsq(M) -> float:
    """Tr(D^2(M)) with D(.) the diagonal part."""
    d = np.diag(M)
    return float(np.real(np.vdot(d, d)))


def _as_sigma(sigma0) -> np.ndarray:
    S = np.asarray(sigma0)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError("sigma0 must be a square matrix")
    if np.iscomplexobj(S):
        if np.allclose(S.imag, 0):
            S = S.real.astype(float)
    else:
        S = S.astype(float)
    return S


def _v1_to_v4(S: np.ndarray, m: InnovationMoments):
    b = m.b
    S2 = S @ S
    SST = S @ S.T
    V1 = _tr(S)
    V2 = V1**2 + (m.nu4 - b - 2) * _dsq(S) + 2 * _tr(np.real(S) @ np.real(S)) + (b - 1) * _tr(SST)
    V3 = b * _tr(SST)
    V3p = _tr(S2)
    e4 = m.nu4 if m.is_real else m.ez4bar_ez2sq
    if e4 is None:
        raise InsufficientMomentsError("complex V4 needs E(conj z^4) E^2(z^2)")
    V4 = b**2 * _tr(SST) ** 2 + (e4 - 3 * b**2) * _dsq(SST) + 2 * b**2 * _tr(SST @ SST)
    V4p = (_tr(S2) ** 2 + (m.nu4 - b - 2) * _dsq(S2) + 2 * _tr(np.real(S2) @ np.real(S2))
           + (b - 1) * _tr(S2 @ S2.T))
    return V1, V2, V3, V3p, V4, V4p


def _v5(S: np.ndarray, m: InnovationMoments) -> float:
    # E(z'Sz)^3 = sum over partitions of the six slots into blocks, each
    # block weighted by a cumulant of z and contracted through S.
    k4 = m.nu4 - 3
    k6 = m.nu6 - 15 * k4 - 10 * m.nu3**2 - 15
    d = np.diag(S)
    S2 = S @ S
    t1, t2, t3 = _tr(S), _tr(S2), _tr(S2 @ S)
    return (t1**3 + 6 * t1 * t2 + 8 * t3
            + k4 * (3 * t1 * float(d @ d) + 12 * float(d @ np.diag(S2)))
            + m.nu3**2 * (6 * float(d @ S @ d) + 4 * float(np.sum(S**3)))
            + k6 * float(np.sum(d**3)))


def _v6(S: np.ndarray, m: InnovationMoments) -> float:
    k4 = m.nu4 - 3
    n3 = m.nu3
    c6 = m.nu6 - 15 * k4 - 10 * n3**2 - 15
    c8 = m.nu8 - 28 * m.nu6 + 210 * k4 - 35 * k4**2 - 56 * n3 * (m.nu5 - 10 * n3) + 315
    one = np.ones(S.shape[0])
    D = np.diag(np.diag(S))
    H = S * S
    S2 = S @ S
    S3 = S2 @ S
    S4 = S3 @ S
    t1, t2 = _tr(S), _tr(S2)
    dsd = float(one @ D @ S @ D @ one)
    return (t1**4 + 12 * t2 * t1**2 + 12 * t2**2 + 32 * t1 * _tr(S3) + 48 * _tr(S4)
            + k4 * (6 * t1**2 * _tr(H) + 12 * t2 * _tr(H) + 48 * t1 * _tr(S * S2)
                    + 48 * _dsq(S2) + 96 * _tr(D @ S3))
            + k4**2 * (3 * _tr(H) ** 2 + 24 * float(one @ D @ H @ D @ one) + 8 * float(one @ (H * H) @ one))
            + c6 * (4 * t1 * _tr(H * S) + 24 * _tr(H * S2))
            + 2 * n3**2 * (12 * dsd * t1 + 24 * float(one @ D @ S2 @ D @ one)
                           + 8 * float(one @ (H * S) @ one) * t1 + 48 * float(one @ H @ S @ D @ one)
                           + 48 * _tr(S2 @ H))
            + 2 * n3 * (m.nu5 - 10 * n3) * (12 * float(one @ D @ S @ D @ D @ one)
                                            + 16 * float(one @ (H * S) @ D @ one))
            + c8 * _tr(H * H))


def _v7(S: np.ndarray, m: InnovationMoments) -> float:
    d = np.diag(S)
    return m.nu3**2 * float(d @ S @ S @ d)


def moments_V(sigma0, m: InnovationMoments) -> VMoments:
    """V1..V7.  V5..V7 are returned as None for complex laws."""
    S = _as_sigma(sigma0)
    base = _v1_to_v4(S, m)
    if not m.is_real:
        return VMoments(*base, None, None, None)
    m._need("nu3", "nu5", "nu6", "nu8")
    return VMoments(*base, _v5(S, m), _v6(S, m), _v7(S, m))


def _check_T(T: int, q: int):
    if T <= 2 * q:
        raise DomainError(f"exact formulas need T > 2q (got T={T}, q={q})")


def exact_gq_moments(sigma0, m: InnovationMoments, q: int, T: int) -> tuple[float, float]:
    """Exact E(G_q) and Var(G_q) under the null."""
    _check_T(T, q)
    S = _as_sigma(sigma0)
    V1, V2, V3, V3p, V4, V4p = _v1_to_v4(S, m)
    if m.is_real:
        m._need("nu3")
        v7 = _v7(S, m)
    else:
        v7 = 0.0
    S2 = S @ S
    SST = S @ S.T
    cross = 2 * q * (q - 1) * (_tr(S2 @ S2) + m.b**2 * _tr(SST @ SST))
    EG = q * V1**2 / T
    var = (q * (V2 - V1**2) ** 2 + 2 * q * (V4 + V4p) + q * (T - 3) * (V3**2 + V3p**2)
           + 4 * q**2 * V1**2 * (V2 - V1**2) + cross + 4 * (q // 2) * v7) / T**3
    return EG, var


class S1SqMoments(NamedTuple):
    E_ps1sq: float
    Var_ps1sq: float
    Cov_Gq_ps1sq: float


def exact_s1sq_moments(sigma0, m: InnovationMoments, T: int, q: int = 1) -> S1SqMoments:
    """Exact E and Var of p*s1_hat^2 and its covariance with G_q (real laws)."""
    if not m.is_real:
        raise DomainError("p*s1_hat^2 moments are implemented for real innovations only")
    _check_T(T, q)
    S = _as_sigma(sigma0)
    p = S.shape[0]
    V1, V2, _, _, _, _, V5, V6, V7 = moments_V(S, m)
    E = V1**2 / p - (V1**2 - V2) / (p * T)
    pp = p * p
    var = (V6 / (pp * T**3)
           + (4 / (pp * T**2) - 4 / (pp * T**3)) * V1 * V5
           + (2 / (pp * T**2) - 3 / (pp * T**3)) * V2**2
           + (4 / (pp * T) - 16 / (pp * T**2) + 12 / (pp * T**3)) * V1**2 * V2
           + (-4 / (pp * T) + 10 / (pp * T**2) - 6 / (pp * T**3)) * V1**4)
    cov = ((4 * q / (p * T**2) - 10 * q / (p * T**3)) * V1**2 * (V2 - V1**2)
           - 4 * q / (p * T**3) * V1**4
           + 2 * q / (p * T**3) * V1 * V5
           + 2 * q / (p * T**3) * V2**2
           + 4 * q / (p * T**3) * V7)
    return S1SqMoments(E, var, cov)


def prop42_leading(sigma0, m: InnovationMoments, q: int, T: int) -> dict[str, float]:
    """Leading-order moment expansions (error o(1/T) relative to the exact ones)."""
    S = _as_sigma(sigma0)
    p = S.shape[0]
    k4 = m.nu4 - 3
    t1, t2, dd = _tr(S), _tr(S @ S), _dsq(S)
    inner = 2 * t2 + k4 * dd
    return {
        "E_ps1sq": t1**2 / p + inner / (p * T),
        "Var_ps1sq": 4 * t1**2 * inner / (p * p * T),
        "E_s2hat": t2 / p + t1**2 / (p * T) + (t2 + k4 * dd) / (p * T),
        "E_Gq": q * t1**2 / T,
        "Var_Gq": 4 * q**2 * t1**2 * inner / T**3 + 2 * q * t2**2 / T**2 + q * inner**2 / T**3,
        "Cov_Gq_ps1sq": 4 * q * t1**2 * inner / (p * T**2),
        "E_Gq1": -q * inner / T**2,
    }


def limit_var_gq(sigma0, m: InnovationMoments, q: int, T: int) -> float:
    """T-free limiting variance of G_q from the normalized traces (real or complex)."""
    S = _as_sigma(sigma0)
    p = S.shape[0]
    c = p / T
    s1 = _tr(S) / p
    s2 = _tr(S @ S) / p
    s2p = _tr(S @ S.T) / p
    sr2 = _tr(np.real(S) @ np.real(S)) / p
    sd2 = _dsq(S) / p
    b = m.b
    return (q * c**2 * (s2**2 + b**2 * s2p**2)
            + 4 * q**2 * c**3 * (m.nu4 - b - 2) * s1**2 * sd2
            + 8 * q**2 * c**3 * s1**2 * sr2
            + 4 * q**2 * c**3 * (b - 1) * s1**2 * s2p)


__all__ = [
    "InnovationMoments", "VMoments", "S1SqMoments", "moments_V", "exact_gq_moments",
    "exact_s1sq_moments", "prop42_leading", "limit_var_gq",
]

