from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAMPLE_RATE = 16000


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"sample_rate must be {SAMPLE_RATE}, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate

    @property
    def power(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.mean(self.samples ** 2))


@dataclass(frozen=True)
class FeatureConfig:
    frame_length_s: float = 0.025
    frame_shift_s: float = 0.010
    n_mels: int = 40
    fft_size: int = 512

    def window_samples(self, sample_rate: int = SAMPLE_RATE) -> int:
        return int(round(self.frame_length_s * sample_rate))

    def hop_samples(self, sample_rate: int = SAMPLE_RATE) -> int:
        return int(round(self.frame_shift_s * sample_rate))


@dataclass(frozen=True)
class FeatureMatrix:
    """T x F log-mel frames."""
    frames: np.ndarray
    frame_shift_s: float = 0.010
    frame_length_s: float = 0.025

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ValueError("frames must be a T x F matrix")
        if not np.all(np.isfinite(frames)):
            raise ValueError("feature frames must be finite")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    def with_frames(self, frames: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(frames=frames, frame_shift_s=self.frame_shift_s, frame_length_s=self.frame_length_s)


@dataclass(frozen=True)
class CmvnStats:
    mean: np.ndarray
    variance: np.ndarray
    frame_count: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        variance = np.asarray(self.variance, dtype=np.float64)
        if mean.shape != variance.shape or mean.ndim != 1:
            raise ValueError("mean and variance must be vectors of equal length")
        if np.any(variance < 0):
            raise ValueError("variance components must be >= 0")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def to_json(self) -> dict:
        return {
            "mean": [float(x) for x in self.mean],
            "variance": [float(x) for x in self.variance],
            "frame_count": int(self.frame_count),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CmvnStats":
        return cls(mean=np.asarray(data["mean"]), variance=np.asarray(data["variance"]), frame_count=int(data["frame_count"]))
