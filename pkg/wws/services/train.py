from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from wws.errors import (
    ConfigMismatchError,
    EmptyInputError,
    EmptyPoolError,
    LabelOutOfRangeError,
    MissingCheckpointError,
    NonFiniteError,
)
from wws.extensions import get_logger, make_rng
from wws.models import (
    NEGATIVE,
    AudioClip,
    AugmentConfig,
    CmvnStats,
    EnrollmentSpec,
    EpochRecord,
    FeatureConfig,
    FeatureMatrix,
    ModelConfig,
    ModelParams,
    Posteriors,
    Stage,
    Subset,
    TrainConfig,
    TrainReport,
    Utterance,
)
from wws.services.augment import augment_utterance
from wws.services.checkpoint import load_checkpoint, save_checkpoint
from wws.services.corpus import build_enrollment_set, resolve_audio_path, select_subset
from wws.services.dsp import apply_cmvn, logmel, read_wav
from wws.services.evaluation import calibrate_from_peaks, counts_at_threshold, peak_posteriors, score
from wws.services.nnet import backward, forward_with_cache, init_params
from wws.utils import write_json

logger = get_logger(__name__)

PROB_CLAMP = 1e-7


# -------- Loss --------

def utterance_loss(posteriors: Posteriors, label: int) -> Tuple[float, np.ndarray]:
    """
    Sum over heads of BCE on the max-pooled posterior. Gradient reaches only
    each head's argmax frame (lowest index on ties) and is zero where the
    clamp to [1e-7, 1 - 1e-7] is active.
    """
    posteriors = np.asarray(posteriors, dtype=np.float64)
    num_frames, num_keywords = posteriors.shape
    if label != NEGATIVE and not 0 <= label < num_keywords:
        raise LabelOutOfRangeError(f"label {label} outside [0, {num_keywords}) and not NEGATIVE")

    heads = np.arange(num_keywords)
    frames = np.argmax(posteriors, axis=0)
    pooled = posteriors[frames, heads]
    target = np.zeros(num_keywords)
    if label != NEGATIVE:
        target[label] = 1.0

    p = np.clip(pooled, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(-np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)))

    inside = (pooled > PROB_CLAMP) & (pooled < 1.0 - PROB_CLAMP)
    d_pooled = np.where(inside, -target / p + (1.0 - target) / (1.0 - p), 0.0)
    grad = np.zeros_like(posteriors)
    grad[frames, heads] = d_pooled
    return loss, grad


# -------- Optimizer --------

class Adam:
    def __init__(self, params: ModelParams, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.steps = 0

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        self.steps += 1
        bias1 = 1.0 - self.beta1 ** self.steps
        bias2 = 1.0 - self.beta2 ** self.steps
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


# -------- Data --------

def _load_clips(utts: Sequence[Utterance], audio_root: Optional[Path], pool: Optional[ThreadPoolExecutor]) -> List[AudioClip]:
    paths = [resolve_audio_path(u, audio_root) for u in utts]
    if pool is None:
        return [read_wav(p) for p in paths]
    return list(pool.map(read_wav, paths))


class _FeatureSource:
    """Training clips held in memory; features are re-augmented per epoch."""

    def __init__(self, utts: Sequence[Utterance], clips: Sequence[AudioClip], cmvn: CmvnStats,
                 augment: AugmentConfig, feature_config: FeatureConfig,
                 pool: Optional[ThreadPoolExecutor]):
        self.utts = list(utts)
        self.clips = list(clips)
        self.cmvn = cmvn
        self.augment = augment
        self.feature_config = feature_config
        self.pool = pool

    def _one(self, index: int, epoch: int) -> FeatureMatrix:
        utt = self.utts[index]
        rng = make_rng(self.augment.seed, utt.utt_id, epoch)
        feats = augment_utterance(self.clips[index], self.augment, rng, self.feature_config)
        return apply_cmvn(feats, self.cmvn)

    def batch(self, indices: Sequence[int], epoch: int) -> List[FeatureMatrix]:
        if self.pool is None:
            return [self._one(i, epoch) for i in indices]
        return list(self.pool.map(lambda i: self._one(i, epoch), indices))

    def plain(self) -> List[FeatureMatrix]:
        return [apply_cmvn(logmel(c, self.feature_config), self.cmvn) for c in self.clips]


def _has_both_classes(utts: Iterable[Utterance]) -> bool:
    labels = {u.is_wake for u in utts}
    return labels == {True, False}


# -------- Stages --------

def checkpoint_prefix(stage: Stage, speaker: Optional[str] = None) -> str:
    return f"{stage.value}_{speaker}" if speaker else stage.value


def _initial_model(config: TrainConfig, model_config: Optional[ModelConfig], cmvn: CmvnStats) -> Tuple[ModelParams, ModelConfig]:
    if config.stage.is_finetune:
        if config.init_checkpoint is None:
            raise MissingCheckpointError(f"{config.stage.value} fine-tuning needs an init checkpoint")
        if not config.init_checkpoint.exists():
            raise MissingCheckpointError(f"init checkpoint not found: {config.init_checkpoint}")
        params, loaded = load_checkpoint(config.init_checkpoint)
        if model_config is not None and model_config != loaded:
            raise ConfigMismatchError("init checkpoint was trained with a different model config")
        model_config = loaded
    else:
        model_config = model_config or ModelConfig(input_dim=cmvn.dim)
        params = init_params(model_config, config.seed)
    if model_config.input_dim != cmvn.dim:
        raise ConfigMismatchError(f"CMVN has {cmvn.dim} dims, model expects {model_config.input_dim}")
    return params, model_config


def train_stage(
    config: TrainConfig,
    train_utts: Sequence[Utterance],
    dev_utts: Sequence[Utterance],
    cmvn: CmvnStats,
    augment: AugmentConfig,
    output_dir: str | Path,
    model_config: Optional[ModelConfig] = None,
    speaker: Optional[str] = None,
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
) -> TrainReport:
    """
    Mini-batch Adam over `train_utts` for up to `config.epochs` epochs. After
    each epoch the threshold is calibrated on dev, the dev score recorded and
    a checkpoint written. Stops after `config.patience` epochs without a new
    best. Fine-tune stages start from `config.init_checkpoint` and keep its
    model config.
    """
    if not train_utts:
        raise EmptyInputError(f"{config.stage.value}: training set is empty")
    params, model_config = _initial_model(config, model_config, cmvn)
    for utt in train_utts:
        if utt.keyword_index >= model_config.num_keywords:
            raise LabelOutOfRangeError(f"{utt.utt_id}: keyword {utt.keyword_index} >= {model_config.num_keywords} heads")

    output_dir = Path(output_dir)
    prefix = checkpoint_prefix(config.stage, speaker)
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        clips = _load_clips(train_utts, audio_root, pool)
        source = _FeatureSource(train_utts, clips, cmvn, augment, feature_config, pool)

        if _has_both_classes(dev_utts):
            dev_feats = _FeatureSource(dev_utts, _load_clips(dev_utts, audio_root, pool), cmvn,
                                       augment, feature_config, None).plain()
            dev_set = list(dev_utts)
        elif _has_both_classes(train_utts):
            logger.info("%s: dev set lacks a class, scoring on the un-augmented training set", prefix)
            dev_feats = source.plain()
            dev_set = list(train_utts)
        else:
            raise EmptyPoolError(f"{prefix}: no dev or training set with both wake and non-wake utterances")
        dev_labels = np.array([u.keyword_index for u in dev_set], dtype=np.int64)

        optimizer = Adam(params, config.learning_rate)
        report = TrainReport(stage=config.stage, speaker=speaker)
        best_score = math.inf

        for epoch in range(1, config.epochs + 1):
            order = make_rng(config.seed, "shuffle", epoch).permutation(len(train_utts))
            losses: List[float] = []
            for start in range(0, len(order), config.batch_size):
                indices = [int(i) for i in order[start:start + config.batch_size]]
                batch_grads = params.zeros_like()
                for index, feats in zip(indices, source.batch(indices, epoch)):
                    posteriors, cache = forward_with_cache(params, model_config, feats)
                    loss, grad_post = utterance_loss(posteriors, train_utts[index].keyword_index)
                    if not math.isfinite(loss):
                        raise NonFiniteError(f"{prefix} epoch {epoch}: loss is not finite on {train_utts[index].utt_id}")
                    grads, _ = backward(params, model_config, feats, grad_post, cache=cache)
                    batch_grads.add_(grads)
                    losses.append(loss)
                batch_grads.scale_(1.0 / len(indices))
                optimizer.step(params, batch_grads)
            if not params.is_finite():
                raise NonFiniteError(f"{prefix} epoch {epoch}: parameters diverged")

            peaks = peak_posteriors(params, model_config, dev_feats)
            threshold = calibrate_from_peaks(peaks, dev_labels)
            dev_score = score(counts_at_threshold(peaks, dev_labels, threshold)).score
            ckpt = save_checkpoint(params, model_config, output_dir / f"{prefix}_{epoch}.ckpt")
            train_loss = math.fsum(losses) / len(losses)
            report.epochs.append(EpochRecord(epoch, train_loss, dev_score, threshold, ckpt.name))
            logger.info(
                "%s epoch %d: train_loss %.5f dev_score %.4f threshold %.4f",
                prefix, epoch, train_loss, dev_score, threshold,
            )

            if dev_score < best_score:
                best_score = dev_score
                report.best_epoch = epoch
                report.best_checkpoint = ckpt.name
            elif epoch - report.best_epoch >= config.patience:
                logger.info("%s: no improvement for %d epochs, stopping", prefix, config.patience)
                break
    finally:
        if pool is not None:
            pool.shutdown()

    write_json(report.to_json(), output_dir / f"{prefix}_report.json")
    return report


def sdd_dev_pool(utts: Sequence[Utterance], speaker: str, dev_subset: Subset | str | None = Subset.DEV) -> List[Utterance]:
    """
    Calibration pool for one speaker's SDD run: their dev utterances, else
    their whole enroll pool, else the shared dev subset. Falls through to an
    empty list when none holds both classes.
    """
    shared = select_subset(utts, dev_subset) if dev_subset else []
    candidates = (
        ("speaker dev", [u for u in shared if u.speaker_id == speaker]),
        ("speaker enroll pool", [u for u in select_subset(utts, Subset.ENROLL) if u.speaker_id == speaker]),
        ("shared dev", list(shared)),
    )
    for name, pool in candidates:
        if _has_both_classes(pool):
            logger.debug("SDD_%s: calibrating on the %s (%d utterances)", speaker, name, len(pool))
            return pool
    return []


def enroll_speaker(
    init: str | Path,
    speaker: str,
    spec: EnrollmentSpec,
    config: TrainConfig,
    utts: Sequence[Utterance],
    cmvn: CmvnStats,
    augment: AugmentConfig,
    output_dir: str | Path,
    dev_subset: Subset | str | None = Subset.DEV,
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
) -> TrainReport:
    """SDD fine-tune of one speaker from the SID checkpoint on their enrollment set."""
    enrollment = build_enrollment_set(utts, speaker, spec)
    dev = sdd_dev_pool(utts, speaker, dev_subset)
    sdd_config = dataclasses.replace(config, stage=Stage.SDD, init_checkpoint=Path(init))
    return train_stage(
        sdd_config, enrollment, dev, cmvn, augment, output_dir,
        speaker=speaker, feature_config=feature_config, audio_root=audio_root,
    )


def run_sdd(
    init: str | Path,
    speakers: Sequence[str],
    spec: EnrollmentSpec,
    config: TrainConfig,
    utts: Sequence[Utterance],
    cmvn: CmvnStats,
    augment: AugmentConfig,
    output_dir: str | Path,
    dev_subset: Subset | str | None = Subset.DEV,
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
) -> Dict[str, Path]:
    """Independent SDD run per speaker; returns each speaker's best checkpoint."""
    output_dir = Path(output_dir)
    best: Dict[str, Path] = {}
    for speaker in speakers:
        report = enroll_speaker(
            init, speaker, spec, config, utts, cmvn, augment, output_dir,
            dev_subset=dev_subset, feature_config=feature_config, audio_root=audio_root,
        )
        best[speaker] = output_dir / report.best_checkpoint
    return best
