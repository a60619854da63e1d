"""Independent brute-force oracles.

Everything here is deliberately written the slow, obvious way (explicit
loops, direct definitions, quadrature) and stays independent of the
package's implementations so the two can check each other.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


# ---------------------------------------------------------------------------
# Seasonal decomposition by direct loops
# ---------------------------------------------------------------------------

def decompose_oracle(x, period):
    """Centered-moving-average additive decomposition, loop by loop."""
    x = [float(v) for v in x]
    n = len(x)
    half = period // 2
    trend = [math.nan] * n
    for i in range(half, n - half):
        if period % 2 == 1:
            window = x[i - half:i + half + 1]
            trend[i] = sum(window) / period
        else:
            total = 0.5 * x[i - half] + 0.5 * x[i + half]
            for j in range(i - half + 1, i + half):
                total += x[j]
            trend[i] = total / period
    detrended = [x[i] - trend[i] for i in range(n)]
    phase_sums = [0.0] * period
    phase_counts = [0] * period
    for i in range(n):
        if not math.isnan(detrended[i]):
            phase_sums[i % period] += detrended[i]
            phase_counts[i % period] += 1
    phase_means = [phase_sums[j] / phase_counts[j] for j in range(period)]
    grand = sum(phase_means) / period
    phase_means = [m - grand for m in phase_means]
    seasonal = [phase_means[i % period] for i in range(n)]
    residual = [x[i] - trend[i] - seasonal[i] for i in range(n)]
    return (np.array(trend), np.array(seasonal), np.array(residual))


def anomalies_oracle(residual, sd_factor=3.0):
    """Direct 3-SD rule over the defined residuals."""
    defined = [i for i, r in enumerate(residual) if not math.isnan(r)]
    vals = [residual[i] for i in defined]
    if len(vals) < 2:
        return []
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    sd = math.sqrt(var)
    if sd == 0.0:
        return []
    return [i for i in defined if abs(residual[i] - mean) > sd_factor * sd]


def local_maxima_oracle(values):
    """Exhaustive plateau-collapsed peak scan."""
    peaks = []
    n = len(values)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left = values[i - 1] if i > 0 else None
        right = values[j + 1] if j + 1 < n else None
        if (left is None or left < values[i]) and (right is None or right < values[i]):
            peaks.append(i)
        i = j + 1
    return peaks


# ---------------------------------------------------------------------------
# ANOVA / ICC by direct summation
# ---------------------------------------------------------------------------

def anova_oracle(values):
    """SS terms by direct triple loops; returns (ms_r, ms_c, ms_e)."""
    n = len(values)
    k = len(values[0])
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(k):
            total += values[i][j]
            count += 1
    m = total / count
    ss_total = 0.0
    for i in range(n):
        for j in range(k):
            ss_total += (values[i][j] - m) ** 2
    ss_rows = 0.0
    for i in range(n):
        row_mean = sum(values[i]) / k
        ss_rows += k * (row_mean - m) ** 2
    ss_cols = 0.0
    for j in range(k):
        col_mean = sum(values[i][j] for i in range(n)) / n
        ss_cols += n * (col_mean - m) ** 2
    ss_e = ss_total - ss_rows - ss_cols
    return (ss_rows / (n - 1), ss_cols / (k - 1), ss_e / ((n - 1) * (k - 1)))


def icc_oracle(values, form):
    """Closed-form ICC from the oracle mean squares."""
    n = len(values)
    k = len(values[0])
    ms_r, ms_c, ms_e = anova_oracle(values)
    if form == "consistency-single":
        return (ms_r - ms_e) / (ms_r + (k - 1) * ms_e)
    if form == "consistency-average":
        return (ms_r - ms_e) / ms_r
    if form == "agreement-single":
        return (ms_r - ms_e) / (ms_r + (k - 1) * ms_e + (k / n) * (ms_c - ms_e))
    if form == "agreement-average":
        return (ms_r - ms_e) / (ms_r + (ms_c - ms_e) / n)
    raise ValueError(form)


def pooled_variance_oracle(values):
    flat = [v for row in values for v in row]
    m = sum(flat) / len(flat)
    return sum((v - m) ** 2 for v in flat) / (len(flat) - 1)


def regression_oracle(x, y):
    """Normal equations solved as an explicit 2x2 system."""
    n = len(x)
    sx = sum(x)
    sy = sum(y)
    sxx = sum(v * v for v in x)
    sxy = sum(a * b for a, b in zip(x, y))
    det = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / det
    intercept = (sy * sxx - sx * sxy) / det
    mean_y = sy / n
    ss_tot = sum((v - mean_y) ** 2 for v in y)
    ss_res = sum((b - (intercept + slope * a)) ** 2 for a, b in zip(x, y))
    r2 = 0.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


# ---------------------------------------------------------------------------
# F distribution by quadrature
# ---------------------------------------------------------------------------

def f_density(x, d1, d2):
    if x <= 0:
        return 0.0
    log_b = (math.lgamma(d1 / 2) + math.lgamma(d2 / 2)
             - math.lgamma((d1 + d2) / 2))
    log_f = ((d1 / 2) * math.log(d1 / d2) + (d1 / 2 - 1) * math.log(x)
             - ((d1 + d2) / 2) * math.log(1 + d1 * x / d2) - log_b)
    return math.exp(log_f)


def f_cdf_quadrature(x, d1, d2):
    if x <= 0:
        return 0.0
    val, _err = quad(f_density, 0.0, x, args=(d1, d2), limit=200)
    return val


def f_quantile_quadrature(p, d1, d2, tol=1e-12):
    """Invert the quadrature CDF by bisection."""
    lo, hi = 0.0, 1.0
    while f_cdf_quadrature(hi, d1, d2) < p:
        lo, hi = hi, hi * 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol * max(1.0, mid):
            break
        if f_cdf_quadrature(mid, d1, d2) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Rotation geometry
# ---------------------------------------------------------------------------

def rotation_matrix(axis, angle_rad):
    """Rodrigues rotation matrix about a unit axis."""
    ux, uy, uz = axis / np.linalg.norm(axis)
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([
        [c + ux * ux * (1 - c), ux * uy * (1 - c) - uz * s, ux * uz * (1 - c) + uy * s],
        [uy * ux * (1 - c) + uz * s, c + uy * uy * (1 - c), uy * uz * (1 - c) - ux * s],
        [uz * ux * (1 - c) - uy * s, uz * uy * (1 - c) + ux * s, c + uz * uz * (1 - c)],
    ])


def raised_cosine_profile(amplitude_deg, n):
    """Smooth 0 -> amplitude -> 0 profile peaking at the middle sample."""
    i = np.arange(n)
    return amplitude_deg * 0.5 * (1 - np.cos(2 * np.pi * i / (n - 1)))
