from __future__ import annotations

import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport with the same API
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from wws.errors import UsageError
from wws.models import (
    AugmentConfig,
    EnrollmentSpec,
    FeatureConfig,
    ModelConfig,
    Stage,
    Subset,
    TrainConfig,
)

load_dotenv()


@dataclass(frozen=True)
class Settings:
    SEED: int = int(os.getenv("WWS_SEED", "0"))
    THREADS: int = int(os.getenv("WWS_THREADS", "1"))
    LOG_LEVEL: str = os.getenv("WWS_LOG_LEVEL", "INFO")
    OUTPUT_DIR: str = os.getenv("WWS_OUTPUT_DIR", "exp")
    CHECKPOINT_MAGIC: bytes = b"WWS1"
    CHECKPOINT_VERSION: int = 1


settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsSection(_Section):
    manifest: Optional[Path] = None
    cmvn: Optional[Path] = None
    init_checkpoint: Optional[Path] = None
    output_dir: Optional[Path] = None


class FeaturesSection(_Section):
    frame_length_s: float = 0.025
    frame_shift_s: float = 0.010
    n_mels: int = 40
    fft_size: int = 512

    def to_config(self) -> FeatureConfig:
        return FeatureConfig(**self.model_dump())


class ModelSection(_Section):
    hidden_dim: int = 64
    num_blocks: int = 4
    kernel_size: int = 8
    dilations: list[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    num_keywords: int = 10

    def to_config(self, input_dim: int) -> ModelConfig:
        return ModelConfig(input_dim=input_dim, **self.model_dump())


class TrainSection(_Section):
    learning_rate: Optional[float] = None
    epochs: int = 30
    batch_size: int = 16
    seed: Optional[int] = None
    patience: int = 10

    def to_config(self, stage: Stage, seed: int, init_checkpoint: Optional[Path]) -> TrainConfig:
        return TrainConfig(
            stage=stage,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=seed,
            init_checkpoint=init_checkpoint,
            patience=self.patience,
        )


class AugmentSection(_Section):
    freq_mask_width_max: int = 10
    time_mask_width_max: int = 25
    n_freq_masks: int = 2
    n_time_masks: int = 2
    speed_ratio_range: Tuple[float, float] = (0.9, 1.1)
    snr_db_range: Tuple[float, float] = (-15.0, 15.0)
    apply_probability: float = 0.8

    def to_config(self, seed: int) -> AugmentConfig:
        return AugmentConfig(seed=seed, **self.model_dump())


class EnrollmentSection(_Section):
    positive_duration_s: float = 30.0
    ratio_negative: float = 5.0

    def to_spec(self, seed: int) -> EnrollmentSpec:
        return EnrollmentSpec(seed=seed, **self.model_dump())


class EvalSection(_Section):
    threshold: Optional[float] = None
    subset: Subset = Subset.TEST
    dev_subset: Subset = Subset.DEV
    sweep_ratios: list[float] = Field(default_factory=lambda: [float(r) for r in range(11)])
    sweep_durations_s: list[float] = Field(default_factory=lambda: [60.0, 120.0, 180.0])
    sweep_duration_ratio: float = 5.0

    @field_validator("threshold")
    @classmethod
    def _threshold_open_interval(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 < value < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        return value


class RunConfig(_Section):
    """Single source of truth for an experiment; CLI flags override fields."""

    seed: Optional[int] = None
    threads: Optional[int] = None
    paths: PathsSection = Field(default_factory=PathsSection)
    features: FeaturesSection = Field(default_factory=FeaturesSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    augment: AugmentSection = Field(default_factory=AugmentSection)
    enrollment: EnrollmentSection = Field(default_factory=EnrollmentSection)
    eval: EvalSection = Field(default_factory=EvalSection)

    def resolved_seed(self, override: Optional[int] = None) -> int:
        """Flag, then config file, then WWS_SEED."""
        if override is not None:
            return override
        if self.train.seed is not None:
            return self.train.seed
        if self.seed is not None:
            return self.seed
        return int(os.getenv("WWS_SEED", settings.SEED))

    def resolved_threads(self, override: Optional[int] = None) -> int:
        if override is not None:
            return max(1, override)
        if self.threads is not None:
            return max(1, self.threads)
        return max(1, int(os.getenv("WWS_THREADS", settings.THREADS)))


def load_run_config(path: Optional[str | Path]) -> RunConfig:
    """Read a TOML run config; no path gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise UsageError(f"Config file not found: {path}")
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
        return RunConfig.model_validate(raw)
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"Config file {path} is not valid TOML: {e}") from e
    except ValidationError as e:
        raise UsageError(f"Config file {path} rejected: {e}") from e
