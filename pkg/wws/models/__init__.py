# Re-export domain types so callers can write: from wws.models import Utterance, ModelConfig, ...
from .corpus import (
    NEGATIVE,
    CorpusStats,
    EnrollmentSpec,
    IntelligibilityRecord,
    Subset,
    SubsetStats,
    Utterance,
)
from .audio import SAMPLE_RATE, AudioClip, CmvnStats, FeatureConfig, FeatureMatrix
from .augment import AugmentConfig
from .network import ModelConfig, ModelParams, Posteriors
from .training import DEFAULT_LEARNING_RATES, EpochRecord, Stage, TrainConfig, TrainReport
from .evaluation import Detection, EvalCounts, Rates, ScoreReport, SpeakerScore

__all__ = [
    # corpus
    "NEGATIVE", "Subset", "Utterance", "SubsetStats", "CorpusStats", "EnrollmentSpec", "IntelligibilityRecord",
    # audio & features
    "SAMPLE_RATE", "AudioClip", "FeatureConfig", "FeatureMatrix", "CmvnStats",
    # augmentation
    "AugmentConfig",
    # network
    "ModelConfig", "ModelParams", "Posteriors",
    # training
    "DEFAULT_LEARNING_RATES", "Stage", "TrainConfig", "EpochRecord", "TrainReport",
    # evaluation
    "Detection", "EvalCounts", "Rates", "SpeakerScore", "ScoreReport",
]
