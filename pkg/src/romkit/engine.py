"""Movement-angle pipeline: segment vectors, angle series, anomaly
rejection by additive seasonal decomposition, and ROM extraction.

The measured quantity is the angular displacement of one body segment
from its starting orientation: alpha_t = arccos(v_t . v_0) where v is the
normalized endpoint-difference vector. No smoothing is applied anywhere
in the chain; anomalous samples are deleted, not interpolated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .config import EngineConfig
from .errors import (
    DecompositionInfeasibleError,
    DegenerateSegmentError,
    RomKitError,
    UnusableRecordingError,
)
from .landmarks import (
    MovementDefinition,
    Recording,
    SegmentSpec,
    VisibilityFilterResult,
    filter_visibility,
    resolve_segment,
)

DEGENERATE_EPS = 1e-9
# dot products this close to +/-1 snap to exactly 0 / 180 degrees
_POLE_EPS = 1e-12


@dataclass(frozen=True)
class SegmentVector:
    """Unit direction of the measured segment at one instant."""

    t: float
    v: np.ndarray


@dataclass(frozen=True)
class AngleSeries:
    """Movement angle per frame, in degrees, relative to ``reference``."""

    t: np.ndarray
    alpha_deg: np.ndarray
    reference: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.alpha_deg.tolist()))


@dataclass(frozen=True)
class DecompositionResult:
    """Additive decomposition: original = trend + seasonal + residual.

    Trend and residual are NaN within half a window of each edge.
    """

    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.residual)


@dataclass(frozen=True)
class RomResult:
    """Extracted ROM angle with anomaly and peak metadata."""

    rom_deg: float
    peak_t: float
    anomalies: tuple[tuple[float, float], ...]
    candidate_peaks: tuple[tuple[float, float], ...]
    needs_review: bool


@dataclass(frozen=True)
class Evaluation:
    """RomResult plus every intermediate the pipeline produced."""

    result: RomResult
    series: AngleSeries
    decomposition: DecompositionResult | None
    anomaly_indices: tuple[int, ...]
    visibility: VisibilityFilterResult
    period: int | None
    messages: tuple[str, ...]


def segment_vectors(recording: Recording, spec: SegmentSpec) -> list[SegmentVector]:
    """Normalized P1-P2 direction per frame.

    The recording should already be visibility-filtered for the spec's
    landmarks; frames here must contain every referenced landmark.
    """
    out = []
    for frame in recording.frames:
        p1, p2 = resolve_segment(frame, spec)
        d = np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)
        norm = float(np.linalg.norm(d))
        if norm < DEGENERATE_EPS:
            raise DegenerateSegmentError(frame.t)
        out.append(SegmentVector(t=frame.t, v=d / norm))
    return out


def _angle_deg(dot: float) -> float:
    if dot >= 1.0 - _POLE_EPS:
        return 0.0
    if dot <= -1.0 + _POLE_EPS:
        return 180.0
    return math.degrees(math.acos(dot))


def angle_series(vectors: list[SegmentVector], baseline_window: int = 1) -> AngleSeries:
    """Angle of each vector against the starting orientation.

    The reference is the first vector; with ``baseline_window`` B > 1 it
    is the renormalized mean of the first B vectors (jitter robustness).
    """
    if not vectors:
        raise UnusableRecordingError("no vectors to build an angle series from")
    if baseline_window <= 1:
        reference = vectors[0].v
    else:
        mean = np.mean([sv.v for sv in vectors[:baseline_window]], axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < DEGENERATE_EPS:
            raise DegenerateSegmentError(vectors[0].t)
        reference = mean / norm
    t = np.array([sv.t for sv in vectors])
    alphas = np.empty(len(vectors))
    for i, sv in enumerate(vectors):
        if baseline_window <= 1 and i == 0:
            alphas[i] = 0.0  # the reference frame is at angle zero by definition
            continue
        alphas[i] = _angle_deg(float(np.dot(sv.v, reference)))
    return AngleSeries(t=t, alpha_deg=alphas, reference=np.array(reference))


def _moving_average_trend(x: np.ndarray, period: int) -> np.ndarray:
    n = len(x)
    if period % 2 == 1:
        filt = np.full(period, 1.0 / period)
        half = period // 2
    else:
        # even periods use the standard 2 x period half-weighted window
        filt = np.concatenate(([0.5], np.ones(period - 1), [0.5])) / period
        half = period // 2
    trend = np.full(n, np.nan)
    trend[half:n - half] = np.convolve(x, filt, mode="valid")
    return trend


def seasonal_decompose(series: AngleSeries, period: int) -> DecompositionResult:
    """Classic additive decomposition by centered moving average.

    trend: moving average of window ``period``; seasonal: per-phase mean
    of the detrended values, re-centered to sum to zero over one period
    and tiled; residual: original - trend - seasonal.
    """
    x = series.alpha_deg
    n = len(x)
    if period < 2:
        raise DecompositionInfeasibleError(f"period must be >= 2, got {period}")
    if n < 2 * period:
        raise DecompositionInfeasibleError(
            f"series of {n} samples is shorter than 2 x period ({2 * period})"
        )
    trend = _moving_average_trend(x, period)
    detrended = x - trend
    phase_means = np.array([np.nanmean(detrended[j::period]) for j in range(period)])
    phase_means -= phase_means.mean()
    seasonal = np.resize(phase_means, n)
    residual = x - trend - seasonal
    return DecompositionResult(trend=trend, seasonal=seasonal,
                               residual=residual, period=period)


def detect_anomalies(decomp: DecompositionResult, sd_factor: float = 3.0) -> list[int]:
    """Indices whose residual sits more than ``sd_factor`` SDs from the mean.

    Statistics use the defined residuals only (sample SD). A zero SD
    yields no anomalies; edge indices are never flagged.
    """
    defined = decomp.defined()
    r = decomp.residual[defined]
    if len(r) < 2:
        return []
    mean = r.mean()
    sd = r.std(ddof=1)
    if sd == 0.0:
        return []
    idx = np.flatnonzero(defined & (np.abs(decomp.residual - mean) > sd_factor * sd))
    return idx.tolist()


def _plateau_peaks(alpha: np.ndarray) -> list[int]:
    """Local maxima with plateaus collapsed to their first sample.

    A run of equal values is a peak when both adjacent values (where they
    exist) are strictly smaller; series boundaries count as open ends, so
    the global maximum is always among the peaks.
    """
    n = len(alpha)
    peaks = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and alpha[j + 1] == alpha[i]:
            j += 1
        left_ok = i == 0 or alpha[i - 1] < alpha[i]
        right_ok = j == n - 1 or alpha[j + 1] < alpha[i]
        if left_ok and right_ok:
            peaks.append(i)
        i = j + 1
    return peaks


def extract_rom(
    series: AngleSeries,
    anomalies: list[int],
    near_tie_fraction: float = 0.05,
) -> RomResult:
    """Drop anomalous samples and take the maximum of what remains.

    ``needs_review`` flags recordings where two or more candidate peaks
    lie within ``near_tie_fraction`` of the global maximum; those are the
    cases a human would re-inspect.
    """
    anomaly_set = set(anomalies)
    keep = np.array([i not in anomaly_set for i in range(len(series))])
    if not keep.any():
        raise UnusableRecordingError("every sample was removed as anomalous")
    t = series.t[keep]
    alpha = series.alpha_deg[keep]
    removed = tuple(
        (float(series.t[i]), float(series.alpha_deg[i])) for i in sorted(anomaly_set)
        if i < len(series)
    )
    imax = int(np.argmax(alpha))
    rom = float(alpha[imax])
    peak_indices = _plateau_peaks(alpha)
    candidates = tuple((float(t[i]), float(alpha[i])) for i in peak_indices)
    near = [c for c in candidates if c[1] >= (1.0 - near_tie_fraction) * rom]
    return RomResult(
        rom_deg=rom,
        peak_t=float(t[imax]),
        anomalies=removed,
        candidate_peaks=candidates,
        needs_review=len(near) >= 2,
    )


def resolve_period(setting: int | str, recording: Recording) -> int:
    """Concrete decomposition period: ~1 s of samples when set to auto."""
    if setting == "auto":
        return max(2, int(recording.effective_rate() + 0.5))
    return int(setting)


def _attach_context(exc: RomKitError, recording: Recording) -> None:
    if getattr(exc, "_context_attached", False):
        return
    ctx = (f"movement={recording.movement!r} subject={recording.subject!r} "
           f"rep={recording.repetition}")
    exc.args = (f"[{ctx}] {exc}",) if exc.args else (f"[{ctx}]",)
    exc._context_attached = True


def evaluate_movement(
    recording: Recording,
    movement: MovementDefinition,
    config: EngineConfig | None = None,
) -> Evaluation:
    """Run the full pipeline on one recording.

    filter_visibility -> segment_vectors -> angle_series ->
    seasonal_decompose -> detect_anomalies -> extract_rom. Recordings too
    short for decomposition skip anomaly removal with a warning.
    """
    config = config or EngineConfig()
    spec = movement.segment_for(recording.source)
    messages: list[str] = []
    try:
        vis = filter_visibility(
            recording,
            spec.landmark_names(),
            threshold=config.visibility_threshold,
            min_valid_frames=config.min_valid_frames,
        )
        vectors = segment_vectors(vis.recording, spec)
        series = angle_series(vectors, baseline_window=config.baseline_window)
        period = resolve_period(config.decomposition_period, vis.recording)
        decomp: DecompositionResult | None = None
        anomaly_indices: list[int] = []
        if len(series) >= 2 * period:
            decomp = seasonal_decompose(series, period)
            anomaly_indices = detect_anomalies(decomp, sd_factor=config.anomaly_sd)
        else:
            msg = (f"series of {len(series)} samples too short for "
                   f"decomposition period {period}; anomaly removal skipped")
            messages.append(msg)
            warnings.warn(msg, stacklevel=2)
        result = extract_rom(series, anomaly_indices,
                             near_tie_fraction=config.near_tie_fraction)
    except RomKitError as exc:
        _attach_context(exc, recording)
        raise
    return Evaluation(
        result=result,
        series=series,
        decomposition=decomp,
        anomaly_indices=tuple(anomaly_indices),
        visibility=vis,
        period=period,
        messages=tuple(messages),
    )
