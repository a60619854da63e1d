"""F-distribution CDF and quantile, for ICC confidence intervals.

The CDF goes through the regularized incomplete beta function; the
quantile inverts it by bracketed root-finding.
"""

from __future__ import annotations

from scipy.optimize import brentq
from scipy.special import betainc


def f_cdf(x: float, df1: float, df2: float) -> float:
    """P(F <= x) for an F(df1, df2) variate."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError(f"degrees of freedom must be positive, got ({df1}, {df2})")
    if x <= 0:
        return 0.0
    z = df1 * x / (df1 * x + df2)
    return float(betainc(df1 / 2.0, df2 / 2.0, z))


def f_quantile(p: float, df1: float, df2: float) -> float:
    """x such that f_cdf(x, df1, df2) = p, by bracketing + Brent's method."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError(f"degrees of freedom must be positive, got ({df1}, {df2})")
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0,1), got {p}")

    def shifted(x: float) -> float:
        return f_cdf(x, df1, df2) - p

    lo, hi = 1.0, 1.0
    while shifted(lo) >= 0.0:
        lo /= 8.0
        if lo < 1e-300:
            return 0.0
    while shifted(hi) <= 0.0:
        hi *= 8.0
        if hi > 1e300:
            raise ArithmeticError("failed to bracket the F quantile")
    return float(brentq(shifted, lo, hi, xtol=1e-14, rtol=8.9e-16))
