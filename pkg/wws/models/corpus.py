from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict

NEGATIVE = -1


class Subset(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"
    ENROLL = "enroll"


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    speaker_id: str
    audio_path: str
    transcript: str
    keyword_index: int
    duration_s: float
    subset: Subset

    def __post_init__(self) -> None:
        if not self.utt_id:
            raise ValueError("utt_id must be non-empty")
        if not isinstance(self.keyword_index, int) or isinstance(self.keyword_index, bool):
            raise ValueError(f"{self.utt_id}: keyword_index must be an integer")
        if self.keyword_index < NEGATIVE:
            raise ValueError(f"{self.utt_id}: keyword_index {self.keyword_index} is invalid")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValueError(f"{self.utt_id}: duration_s must be > 0")

    @property
    def is_wake(self) -> bool:
        return self.keyword_index != NEGATIVE

    def to_record(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "speaker_id": self.speaker_id,
            "audio_path": self.audio_path,
            "transcript": self.transcript,
            "keyword_index": self.keyword_index,
            "duration_s": self.duration_s,
            "subset": self.subset.value,
        }


@dataclass(frozen=True)
class SubsetStats:
    total_hours: float = 0.0
    speaker_count: int = 0
    utterance_count: int = 0


@dataclass(frozen=True)
class CorpusStats:
    subsets: Dict[Subset, SubsetStats] = field(default_factory=dict)

    def __getitem__(self, subset: Subset | str) -> SubsetStats:
        return self.subsets[Subset(subset)]


@dataclass(frozen=True)
class EnrollmentSpec:
    positive_duration_s: float = 30.0
    ratio_negative: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.positive_duration_s > 0:
            raise ValueError("positive_duration_s must be > 0")
        if not self.ratio_negative >= 0:
            raise ValueError("ratio_negative must be >= 0")

    @classmethod
    def for_total_duration(cls, total_s: float, ratio_negative: float, seed: int = 0) -> "EnrollmentSpec":
        """Enrollment whose positives plus negatives add up to `total_s`."""
        return cls(positive_duration_s=total_s / (1.0 + ratio_negative), ratio_negative=ratio_negative, seed=seed)

    @property
    def total_duration_s(self) -> float:
        return self.positive_duration_s * (1.0 + self.ratio_negative)


@dataclass(frozen=True)
class IntelligibilityRecord:
    speaker_id: str
    subjective: float
    objective: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.subjective <= 1.0:
            raise ValueError(f"{self.speaker_id}: subjective intelligibility must lie in [0, 1]")
        if not self.objective >= 0.0:
            raise ValueError(f"{self.speaker_id}: objective CER must be >= 0")
