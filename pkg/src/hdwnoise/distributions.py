"""Normal and chi-square tail functions used for p-values and critical values.

The chi-square routines go through the regularized incomplete gamma
function, so they stay accurate for degrees of freedom in the millions
(p = 900, q = 3 gives 2.43e6).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special

from .errors import DomainError


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def normal_cdf(z):
    return special.ndtr(z)


def normal_sf(z):
    """Upper tail 1 - Phi(z), computed without cancellation."""
    return special.ndtr(-np.asarray(z, dtype=float))


def normal_upper_quantile(alpha: float) -> float:
    """Z_alpha with P(Z > Z_alpha) = alpha."""
    alpha = _check_alpha(alpha)
    return float(-special.ndtri(alpha))


def _check_dof(dof: float) -> float:
    dof = float(dof)
    if not (dof >= 1.0) or not math.isfinite(dof):
        raise DomainError(f"degrees of freedom must be >= 1, got {dof}")
    return dof


def chi2_cdf(x, dof: float):
    dof = _check_dof(dof)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("chi-square argument must be nonnegative")
    return special.gammainc(dof / 2.0, x / 2.0)


def chi2_sf(x, dof: float):
    dof = _check_dof(dof)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("chi-square argument must be nonnegative")
    return special.gammaincc(dof / 2.0, x / 2.0)


def wilson_hilferty_quantile(alpha: float, dof: float) -> float:
    """Closed-form approximation to the upper-alpha chi-square quantile."""
    alpha = _check_alpha(alpha)
    dof = _check_dof(dof)
    z = normal_upper_quantile(alpha)
    h = 2.0 / (9.0 * dof)
    return dof * max(1.0 - h + z * math.sqrt(h), 1e-8) ** 3


def chi2_upper_quantile(alpha: float, dof: float) -> float:
    """Upper-alpha chi-square quantile.

    Bracket the root around the Wilson-Hilferty value, then refine with
    Brent's method on the tail probability.
    """
    alpha = _check_alpha(alpha)
    dof = _check_dof(dof)
    a = dof / 2.0

    # Solve on whichever tail is smaller to keep the residual well scaled.
    if alpha <= 0.5:
        def resid(x):
            return special.gammaincc(a, x / 2.0) - alpha
    else:
        def resid(x):
            return (1.0 - alpha) - special.gammainc(a, x / 2.0)

    x0 = wilson_hilferty_quantile(alpha, dof)
    spread = 10.0 * math.sqrt(2.0 * dof) + 10.0
    lo, hi = max(x0 - spread, 0.0), x0 + spread
    while resid(lo) < 0:
        lo = lo / 2.0 if lo > 1e-300 else 0.0
        if lo == 0.0:
            break
    while resid(hi) > 0:
        hi = 2.0 * hi + 1.0
    if resid(lo) <= 0:
        return lo
    root = optimize.brentq(resid, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)
