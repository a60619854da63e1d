"""romkit: joint range-of-motion evaluation from 3D landmark trajectories."""

from .config import Config, EngineConfig, StatsConfig, default_config, load_config
from .engine import (
    AngleSeries,
    DecompositionResult,
    Evaluation,
    RomResult,
    SegmentVector,
    angle_series,
    detect_anomalies,
    evaluate_movement,
    extract_rom,
    seasonal_decompose,
    segment_vectors,
)
from .landmarks import (
    LandmarkFrame,
    MovementDefinition,
    Recording,
    SegmentSpec,
    filter_visibility,
    list_movements,
    registry_lookup,
    resolve_segment,
)
from .stats import (
    IccResult,
    MeasurementTable,
    RegressionResult,
    ReliabilityReport,
    anova_decompose,
    icc,
    landis_koch_band,
    mdc,
    regress,
    reliability_report,
    sem,
    total_variance,
)

__version__ = "0.1.0"

__all__ = [
    "AngleSeries", "Config", "DecompositionResult", "EngineConfig",
    "Evaluation", "IccResult", "LandmarkFrame", "MeasurementTable",
    "MovementDefinition", "Recording", "RegressionResult",
    "ReliabilityReport", "RomResult", "SegmentSpec", "SegmentVector",
    "StatsConfig", "angle_series", "anova_decompose", "default_config",
    "detect_anomalies", "evaluate_movement", "extract_rom",
    "filter_visibility", "icc", "landis_koch_band", "list_movements",
    "load_config", "mdc", "regress", "registry_lookup",
    "reliability_report", "resolve_segment", "seasonal_decompose",
    "segment_vectors", "sem", "total_variance",
]
