from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional

DEFAULT_LEARNING_RATES = {"SIC": 1e-3, "SID": 1e-4, "SDD": 1e-4}


class Stage(str, Enum):
    SIC = "SIC"
    SID = "SID"
    SDD = "SDD"

    @property
    def is_finetune(self) -> bool:
        return self is not Stage.SIC


@dataclass(frozen=True)
class TrainConfig:
    stage: Stage = Stage.SIC
    learning_rate: Optional[float] = None
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    init_checkpoint: Optional[Path] = None
    patience: int = 10
    threads: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", DEFAULT_LEARNING_RATES[self.stage.value])
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.init_checkpoint is not None:
            object.__setattr__(self, "init_checkpoint", Path(self.init_checkpoint))


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    dev_score: float
    threshold: float
    checkpoint: str


@dataclass
class TrainReport:
    stage: Stage
    speaker: Optional[str] = None
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_checkpoint: str = ""

    @property
    def best(self) -> EpochRecord:
        return next(r for r in self.epochs if r.epoch == self.best_epoch)

    def to_json(self) -> dict:
        return {
            "stage": self.stage.value,
            "speaker": self.speaker,
            "epochs": [
                {
                    "epoch": r.epoch,
                    "train_loss": r.train_loss,
                    "dev_score": r.dev_score,
                    "threshold": r.threshold,
                    "checkpoint": r.checkpoint,
                }
                for r in self.epochs
            ],
            "best_epoch": self.best_epoch,
            "best_checkpoint": self.best_checkpoint,
        }
