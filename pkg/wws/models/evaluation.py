from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional


@dataclass(frozen=True)
class Detection:
    fired: bool
    keyword: Optional[int]
    peak_posterior: float


@dataclass(frozen=True)
class EvalCounts:
    n_wake: int = 0
    n_non_wake: int = 0
    n_fr: int = 0
    n_fa: int = 0

    def __post_init__(self) -> None:
        if min(self.n_wake, self.n_non_wake, self.n_fr, self.n_fa) < 0:
            raise ValueError("counts must be >= 0")
        if self.n_fr > self.n_wake:
            raise ValueError("N_FR cannot exceed N_wake")
        if self.n_fa > self.n_non_wake:
            raise ValueError("N_FA cannot exceed N_non_wake")

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(
            n_wake=self.n_wake + other.n_wake,
            n_non_wake=self.n_non_wake + other.n_non_wake,
            n_fr=self.n_fr + other.n_fr,
            n_fa=self.n_fa + other.n_fa,
        )

    def to_json(self) -> dict:
        return {"n_wake": self.n_wake, "n_non_wake": self.n_non_wake, "n_fr": self.n_fr, "n_fa": self.n_fa}


@dataclass(frozen=True)
class Rates:
    frr: float
    far: float
    score: float


@dataclass(frozen=True)
class SpeakerScore:
    counts: EvalCounts
    frr: Optional[float]
    far: Optional[float]
    score: Optional[float]

    def to_json(self) -> dict:
        return {"frr": self.frr, "far": self.far, "score": self.score, **self.counts.to_json()}


@dataclass(frozen=True)
class ScoreReport:
    frr: float
    far: float
    score: float
    threshold: float
    counts: EvalCounts
    per_speaker: Dict[str, SpeakerScore] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "frr": self.frr,
            "far": self.far,
            "score": self.score,
            "threshold": self.threshold,
            "counts": self.counts.to_json(),
            "per_speaker": {spk: s.to_json() for spk, s in sorted(self.per_speaker.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScoreReport":
        per_speaker = {}
        for spk, s in data.get("per_speaker", {}).items():
            counts = EvalCounts(s["n_wake"], s["n_non_wake"], s["n_fr"], s["n_fa"])
            per_speaker[spk] = SpeakerScore(counts=counts, frr=s["frr"], far=s["far"], score=s["score"])
        c = data["counts"]
        return cls(
            frr=data["frr"],
            far=data["far"],
            score=data["score"],
            threshold=data["threshold"],
            counts=EvalCounts(c["n_wake"], c["n_non_wake"], c["n_fr"], c["n_fa"]),
            per_speaker=per_speaker,
        )
