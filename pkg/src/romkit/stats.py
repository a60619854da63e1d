"""Reliability statistics over cohorts of ROM measurements.

Implements the two-way mixed-effects ICC family (consistency/agreement x
single/average) from the classic ANOVA mean squares, F-based 95%
confidence intervals, standard error of measurement, minimal detectable
change, qualitative agreement bands, and inter-rater linear regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRegressionError,
    InsufficientDataError,
    UndefinedIccError,
)
from .fdist import f_quantile

Z_95 = 1.959964
MDC_FACTOR = Z_95 * math.sqrt(2.0)

ICC_FORMS = (
    "consistency-single",
    "consistency-average",
    "agreement-single",
    "agreement-average",
)

BAND_POOR = "poor/none"


@dataclass(frozen=True)
class MeasurementTable:
    """n x k matrix of ROM angles: subjects by repeated measurements."""

    values: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise InsufficientDataError("measurement table must be 2-dimensional")
        n, k = v.shape
        if n < 2 or k < 2:
            raise InsufficientDataError(
                f"need at least 2 subjects and 2 measurements, got {n} x {k}"
            )
        if not np.isfinite(v).all():
            raise InsufficientDataError("missing or non-finite cells are rejected")
        if len(self.row_labels) != n or len(self.col_labels) != k:
            raise InsufficientDataError("label lengths must match the matrix shape")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AnovaResult:
    """Two-way ANOVA mean squares (subjects x measurements, no replication)."""

    ms_rows: float
    ms_cols: float
    ms_error: float
    df_rows: int
    df_cols: int
    df_error: int
    grand_mean: float


@dataclass(frozen=True)
class IccResult:
    icc: float
    ci_low: float
    ci_high: float
    form: str
    df1: float
    df2: float
    band: str


@dataclass(frozen=True)
class ReliabilityReport:
    icc: IccResult
    sem_deg: float
    mdc_deg: float
    total_variance: float


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n: int


def anova_decompose(table: MeasurementTable) -> AnovaResult:
    """Mean squares for rows (subjects), columns, and residual error."""
    x = table.values
    n, k = x.shape
    m = x.mean()
    ss_rows = k * float(((x.mean(axis=1) - m) ** 2).sum())
    ss_cols = n * float(((x.mean(axis=0) - m) ** 2).sum())
    ss_total = float(((x - m) ** 2).sum())
    ss_error = ss_total - ss_rows - ss_cols
    tol = 1e-9 * max(1.0, ss_total)
    if ss_error < -tol:
        raise ArithmeticError(f"negative residual sum of squares: {ss_error}")
    ss_error = max(ss_error, 0.0)
    return AnovaResult(
        ms_rows=ss_rows / (n - 1),
        ms_cols=ss_cols / (k - 1),
        ms_error=ss_error / ((n - 1) * (k - 1)),
        df_rows=n - 1,
        df_cols=k - 1,
        df_error=(n - 1) * (k - 1),
        grand_mean=m,
    )


def _icc_point(anova: AnovaResult, n: int, k: int, form: str) -> float:
    msr, msc, mse = anova.ms_rows, anova.ms_cols, anova.ms_error
    if form == "consistency-single":
        denom = msr + (k - 1) * mse
    elif form == "consistency-average":
        denom = msr
    elif form == "agreement-single":
        denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    elif form == "agreement-average":
        denom = msr + (msc - mse) / n
    else:
        raise ValueError(f"unknown ICC form {form!r}; use one of {ICC_FORMS}")
    if denom == 0.0:
        raise UndefinedIccError("ICC undefined: zero denominator")
    if form == "consistency-average":
        return 1.0 - mse / msr
    return (msr - mse) / denom


def _consistency_ci(anova: AnovaResult, n: int, k: int, form: str) -> tuple:
    f_obs = anova.ms_rows / anova.ms_error
    df1, df2 = n - 1, (n - 1) * (k - 1)
    f_low = f_obs / f_quantile(0.975, df1, df2)
    f_up = f_obs * f_quantile(0.975, df2, df1)
    if form == "consistency-average":
        return 1.0 - 1.0 / f_low, 1.0 - 1.0 / f_up, df1, df2
    return ((f_low - 1.0) / (f_low + k - 1.0),
            (f_up - 1.0) / (f_up + k - 1.0), df1, df2)


def _agreement_ci(anova: AnovaResult, n: int, k: int, form: str, icc1: float) -> tuple:
    # Satterthwaite-approximate df for the absolute-agreement interval
    msr, msc, mse = anova.ms_rows, anova.ms_cols, anova.ms_error
    a = (k * icc1) / (n * (1.0 - icc1))
    b = 1.0 + (k * icc1 * (n - 1.0)) / (n * (1.0 - icc1))
    v = (a * msc + b * mse) ** 2 / (
        (a * msc) ** 2 / (k - 1) + (b * mse) ** 2 / ((n - 1) * (k - 1))
    )
    v = max(v, 1e-6)
    f_low = f_quantile(0.975, n - 1, v)
    f_up = f_quantile(0.975, v, n - 1)
    mix = k * msc + (k * n - k - n) * mse
    low = n * (msr - f_low * mse) / (f_low * mix + n * msr)
    up = n * (f_up * msr - mse) / (mix + n * f_up * msr)
    if form == "agreement-average":
        low = low * k / (1.0 + low * (k - 1.0))
        up = up * k / (1.0 + up * (k - 1.0))
    return low, up, n - 1, v


def icc(table: MeasurementTable, form: str = "consistency-average") -> IccResult:
    """ICC point estimate with a 95% confidence interval.

    Consistency forms ignore column offsets; agreement forms penalize
    them. Average forms score the mean of the k measurements, single
    forms one measurement.
    """
    if form not in ICC_FORMS:
        raise ValueError(f"unknown ICC form {form!r}; use one of {ICC_FORMS}")
    anova = anova_decompose(table)
    n, k = table.n, table.k
    if anova.ms_error == 0.0 and anova.ms_rows == 0.0:
        raise UndefinedIccError("ICC undefined: no variance in the table")
    if anova.ms_error == 0.0:
        # perfect within-subject reproducibility; the F interval collapses
        value = _icc_point(anova, n, k, form)
        return IccResult(icc=value, ci_low=value, ci_high=value, form=form,
                         df1=n - 1, df2=(n - 1) * (k - 1),
                         band=landis_koch_band(value))
    value = _icc_point(anova, n, k, form)
    if form.startswith("consistency"):
        low, up, df1, df2 = _consistency_ci(anova, n, k, form)
    else:
        icc1 = _icc_point(anova, n, k, "agreement-single")
        if icc1 >= 1.0:
            low, up, df1, df2 = value, value, n - 1, (n - 1) * (k - 1)
        else:
            low, up, df1, df2 = _agreement_ci(anova, n, k, form, icc1)
    return IccResult(icc=value, ci_low=low, ci_high=up, form=form,
                     df1=df1, df2=df2, band=landis_koch_band(value))


def total_variance(table: MeasurementTable) -> float:
    """Pooled sample variance of every cell (denominator nk - 1)."""
    flat = table.values.ravel()
    if flat.size < 2:
        raise InsufficientDataError("need at least 2 values for a variance")
    return float(flat.var(ddof=1))


def sem(total_var: float, icc_value: float) -> float:
    """Standard error of measurement: sqrt(total variance x (1 - ICC))."""
    if total_var < 0:
        raise ValueError(f"total variance must be >= 0, got {total_var}")
    if icc_value > 1:
        raise ValueError(f"ICC must be <= 1, got {icc_value}")
    if icc_value == 1.0:
        return 0.0
    return math.sqrt(total_var * (1.0 - icc_value))


def mdc(sem_deg: float) -> float:
    """Minimal detectable change at 95% confidence: 1.959964 sqrt(2) SE_M."""
    if sem_deg < 0:
        raise ValueError(f"SE_M must be >= 0, got {sem_deg}")
    return MDC_FACTOR * sem_deg


def landis_koch_band(icc_value: float) -> str:
    """Qualitative agreement label; intervals are upper-inclusive."""
    if icc_value <= 0.0:
        return BAND_POOR
    if icc_value <= 0.2:
        return "slight"
    if icc_value <= 0.4:
        return "fair"
    if icc_value <= 0.6:
        return "moderate"
    if icc_value <= 0.8:
        return "substantial"
    return "almost-perfect"


def reliability_report(table: MeasurementTable, form: str) -> ReliabilityReport:
    icc_res = icc(table, form)
    tv = total_variance(table)
    sem_deg = sem(tv, icc_res.icc)
    return ReliabilityReport(icc=icc_res, sem_deg=sem_deg,
                             mdc_deg=mdc(sem_deg), total_variance=tv)


def regress(predictor: list[float], response: list[float]) -> RegressionResult:
    """Ordinary least squares of response on predictor."""
    x = np.asarray(predictor, dtype=float)
    y = np.asarray(response, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InsufficientDataError("predictor and response must be equal-length 1-D")
    n = len(x)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 pairs to regress, got {n}")
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0.0:
        raise DegenerateRegressionError("predictor has zero variance")
    sxy = float(((x - x.mean()) * (y - y.mean())).sum())
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return RegressionResult(slope=0.0, intercept=float(y.mean()),
                                r_squared=0.0, n=n)
    ss_res = float(((y - (intercept + slope * x)) ** 2).sum())
    r_squared = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return RegressionResult(slope=slope, intercept=intercept,
                            r_squared=r_squared, n=n)


# ---------------------------------------------------------------------------
# Long-format pivoting
# ---------------------------------------------------------------------------

def _movement_label(movement: str, phase: str | None) -> str:
    return f"{movement} ({phase})" if phase else movement


def pivot_test_retest(records: list[dict], movement_label: str,
                      rater: str) -> MeasurementTable:
    """Subjects x repetitions table for one movement and one rater."""
    cells: dict[tuple[str, int], float] = {}
    for rec in records:
        if (_movement_label(rec["movement"], rec.get("phase")) != movement_label
                or rec["rater"] != rater):
            continue
        key = (rec["subject"], int(rec["repetition"]))
        if key in cells:
            raise InsufficientDataError(
                f"duplicate measurement for subject={key[0]} rep={key[1]} "
                f"({movement_label}, {rater})"
            )
        cells[key] = float(rec["rom_deg"])
    subjects = sorted({s for s, _ in cells})
    reps = sorted({r for _, r in cells})
    if len(subjects) < 2 or len(reps) < 2:
        raise InsufficientDataError(
            f"{movement_label} ({rater}): need >= 2 subjects and >= 2 "
            f"repetitions, got {len(subjects)} x {len(reps)}"
        )
    values = np.empty((len(subjects), len(reps)))
    for i, s in enumerate(subjects):
        for j, r in enumerate(reps):
            if (s, r) not in cells:
                raise InsufficientDataError(
                    f"{movement_label} ({rater}): missing cell for "
                    f"subject={s} rep={r}"
                )
            values[i, j] = cells[(s, r)]
    return MeasurementTable(values=values, row_labels=tuple(subjects),
                            col_labels=tuple(str(r) for r in reps))


def pivot_inter_rater(records: list[dict], movement_label: str,
                      layout: str = "pooled") -> MeasurementTable:
    """Rater-paired table for one movement.

    ``pooled`` keeps each repetition as its own row (subject x repetition
    pairs); ``averaged`` collapses repetitions to their per-subject mean.
    """
    if layout not in ("pooled", "averaged"):
        raise ValueError("layout must be 'pooled' or 'averaged'")
    cells: dict[tuple, dict[str, list[float]]] = {}
    raters: set[str] = set()
    for rec in records:
        if _movement_label(rec["movement"], rec.get("phase")) != movement_label:
            continue
        raters.add(rec["rater"])
        row_key = ((rec["subject"], int(rec["repetition"]))
                   if layout == "pooled" else (rec["subject"],))
        cells.setdefault(row_key, {}).setdefault(rec["rater"], []).append(
            float(rec["rom_deg"]))
    rater_list = sorted(raters)
    if len(rater_list) < 2:
        raise InsufficientDataError(
            f"{movement_label}: inter-rater analysis needs >= 2 raters, "
            f"got {rater_list}"
        )
    row_keys = sorted(cells)
    rows = []
    for key in row_keys:
        row = []
        for rater in rater_list:
            vals = cells[key].get(rater)
            if not vals:
                raise InsufficientDataError(
                    f"{movement_label}: missing {rater} measurement for row {key}"
                )
            if layout == "pooled" and len(vals) > 1:
                raise InsufficientDataError(
                    f"{movement_label}: duplicate {rater} measurement for row {key}"
                )
            row.append(sum(vals) / len(vals))
        rows.append(row)
    if len(rows) < 2:
        raise InsufficientDataError(f"{movement_label}: need >= 2 rows")
    labels = tuple("/".join(str(p) for p in key) for key in row_keys)
    return MeasurementTable(values=np.array(rows), row_labels=labels,
                            col_labels=tuple(rater_list))


def movement_labels(records: list[dict]) -> list[str]:
    return sorted({_movement_label(r["movement"], r.get("phase")) for r in records})


def raters(records: list[dict]) -> list[str]:
    return sorted({r["rater"] for r in records})


def pick_predictor_rater(rater_list: list[str], requested: str | None = None) -> str:
    """Regression predictor column: the reference system when recognizable."""
    if requested is not None:
        if requested not in rater_list:
            raise InsufficientDataError(
                f"predictor rater {requested!r} not among {rater_list}")
        return requested
    for candidate in rater_list:
        if candidate.lower() in ("optitrack", "mocap", "ground-truth"):
            return candidate
    return rater_list[0]
