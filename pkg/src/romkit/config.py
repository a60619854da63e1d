"""Engine and statistics configuration, config-file loading, fingerprints."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path

DATA_DIR_ENV = "ROMKIT_DATA_DIR"


@dataclass(frozen=True)
class EngineConfig:
    """Tunable knobs of the angle pipeline; defaults match the method."""

    visibility_threshold: float = 0.5
    min_valid_frames: int = 10
    decomposition_period: int | str = "auto"  # "auto" = ~1 s of samples
    anomaly_sd: float = 3.0
    near_tie_fraction: float = 0.05
    baseline_window: int = 1

    def __post_init__(self):
        if not 0.0 <= self.visibility_threshold <= 1.0:
            raise ValueError("visibility_threshold must be in [0,1]")
        if self.min_valid_frames < 1:
            raise ValueError("min_valid_frames must be >= 1")
        if isinstance(self.decomposition_period, str):
            if self.decomposition_period != "auto":
                raise ValueError("decomposition_period must be an int or 'auto'")
        elif self.decomposition_period < 2:
            raise ValueError("decomposition_period must be >= 2")
        if self.anomaly_sd <= 0:
            raise ValueError("anomaly_sd must be > 0")
        if not 0.0 <= self.near_tie_fraction < 1.0:
            raise ValueError("near_tie_fraction must be in [0,1)")
        if self.baseline_window < 1:
            raise ValueError("baseline_window must be >= 1")

    def fingerprint(self) -> str:
        """Stable short hash identifying this configuration."""
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class StatsConfig:
    """Defaults for the reliability analyses."""

    test_retest_form: str = "consistency-average"
    inter_rater_form: str = "consistency-single"
    inter_rater_layout: str = "pooled"  # or "averaged": mean over repetitions

    def __post_init__(self):
        forms = {
            "consistency-single", "consistency-average",
            "agreement-single", "agreement-average",
        }
        if self.test_retest_form not in forms or self.inter_rater_form not in forms:
            raise ValueError(f"ICC form must be one of {sorted(forms)}")
        if self.inter_rater_layout not in ("pooled", "averaged"):
            raise ValueError("inter_rater_layout must be 'pooled' or 'averaged'")


@dataclass(frozen=True)
class Config:
    engine: EngineConfig
    stats: StatsConfig
    registry_overrides: dict


def default_config() -> Config:
    return Config(engine=EngineConfig(), stats=StatsConfig(), registry_overrides={})


def load_config(path: str | Path | None) -> Config:
    """Load a JSON config file; missing sections fall back to defaults."""
    if path is None:
        return default_config()
    raw = json.loads(Path(path).read_text())
    engine = EngineConfig(**raw.get("engine", {}))
    stats = StatsConfig(**raw.get("stats", {}))
    return Config(engine=engine, stats=stats,
                  registry_overrides=raw.get("registry_overrides", {}))


def apply_engine_overrides(config: Config, **overrides) -> Config:
    """Apply CLI flag overrides (flags win over the config file)."""
    present = {k: v for k, v in overrides.items() if v is not None}
    if not present:
        return config
    return replace(config, engine=replace(config.engine, **present))


def data_dir(flag_value: str | None = None) -> Path:
    """Resolve the data directory: CLI flag, then env var, then CWD."""
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(".")
