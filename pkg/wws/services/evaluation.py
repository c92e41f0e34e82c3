from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats as sps

from wws.errors import (
    ConfigMismatchError,
    EmptyInputError,
    EmptyPoolError,
    ZeroVarianceError,
)
from wws.extensions import get_logger
from wws.models import (
    NEGATIVE,
    CmvnStats,
    Detection,
    EvalCounts,
    FeatureConfig,
    FeatureMatrix,
    IntelligibilityRecord,
    ModelConfig,
    ModelParams,
    Posteriors,
    Rates,
    ScoreReport,
    SpeakerScore,
    Utterance,
)
from wws.services.checkpoint import load_checkpoint
from wws.services.corpus import resolve_audio_path
from wws.services.dsp import apply_cmvn, extract_features
from wws.services.nnet import forward

logger = get_logger(__name__)

_THRESHOLD_MIN = float(np.nextafter(0.0, 1.0))
_THRESHOLD_MAX = float(np.nextafter(1.0, 0.0))


# -------- Decision rule and metric --------

def detect(posteriors: Posteriors, threshold: float) -> Detection:
    """Fire when the best head's peak over frames reaches the threshold (>=)."""
    peaks = np.asarray(posteriors).max(axis=0)
    keyword = int(np.argmax(peaks))
    peak = float(peaks[keyword])
    fired = peak >= threshold
    return Detection(fired=fired, keyword=keyword if fired else None, peak_posterior=peak)


def score(counts: EvalCounts) -> Rates:
    if counts.n_wake < 1:
        raise EmptyPoolError("no wake-word samples: FRR is undefined")
    if counts.n_non_wake < 1:
        raise EmptyPoolError("no non-wake samples: FAR is undefined")
    frr = counts.n_fr / counts.n_wake
    far = counts.n_fa / counts.n_non_wake
    return Rates(frr=frr, far=far, score=frr + far)


def count_utterance(detection: Detection, label: int) -> EvalCounts:
    """
    A wake utterance is a false reject unless its own keyword fired; a wrong
    keyword firing is not also a false alarm. A non-wake utterance is a false
    alarm iff anything fired.
    """
    if label == NEGATIVE:
        return EvalCounts(n_non_wake=1, n_fa=int(detection.fired))
    accepted = detection.fired and detection.keyword == label
    return EvalCounts(n_wake=1, n_fr=int(not accepted))


def _rates_or_none(counts: EvalCounts) -> SpeakerScore:
    frr = counts.n_fr / counts.n_wake if counts.n_wake else None
    far = counts.n_fa / counts.n_non_wake if counts.n_non_wake else None
    total = frr + far if frr is not None and far is not None else None
    return SpeakerScore(counts=counts, frr=frr, far=far, score=total)


# -------- Peak posteriors --------

def load_utterance_features(
    utts: Sequence[Utterance],
    cmvn: Optional[CmvnStats],
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
    threads: int = 1,
) -> List[FeatureMatrix]:
    """Log-mel (plus CMVN when given) for each utterance, in input order."""

    def _one(utt: Utterance) -> FeatureMatrix:
        feats = extract_features(resolve_audio_path(utt, audio_root), feature_config)
        return apply_cmvn(feats, cmvn) if cmvn is not None else feats

    if threads <= 1:
        return [_one(u) for u in utts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_one, utts))


def peak_posteriors(
    params: ModelParams,
    config: ModelConfig,
    features: Sequence[FeatureMatrix],
    threads: int = 1,
) -> np.ndarray:
    """N x K matrix of per-head maxima over frames."""
    if not features:
        return np.zeros((0, config.num_keywords))
    for feats in features:
        if feats.dim != config.input_dim:
            raise ConfigMismatchError(f"features have {feats.dim} dims, model expects {config.input_dim}")

    def _one(feats: FeatureMatrix) -> np.ndarray:
        return forward(params, config, feats).max(axis=0)

    if threads <= 1:
        rows = [_one(f) for f in features]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_one, features))
    return np.vstack(rows)


def _labels(utts: Sequence[Utterance]) -> np.ndarray:
    return np.array([u.keyword_index for u in utts], dtype=np.int64)


def counts_at_threshold(peaks: np.ndarray, labels: np.ndarray, threshold: float) -> EvalCounts:
    """Aggregate counts straight from peak matrices; equals summing count_utterance per row."""
    peaks = np.asarray(peaks)
    labels = np.asarray(labels)
    best = peaks.max(axis=1) if peaks.size else np.zeros(0)
    keyword = peaks.argmax(axis=1) if peaks.size else np.zeros(0, dtype=np.int64)
    fired = best >= threshold
    wake = labels != NEGATIVE
    accepted = fired & wake & (keyword == labels)
    return EvalCounts(
        n_wake=int(wake.sum()),
        n_non_wake=int((~wake).sum()),
        n_fr=int(wake.sum() - accepted.sum()),
        n_fa=int((fired & ~wake).sum()),
    )


def calibrate_from_peaks(peaks: np.ndarray, labels: np.ndarray) -> float:
    """
    Observed peak minimizing score; ties go to the largest threshold. A peak
    saturated at 0 or 1 is pulled one ulp inside so the result stays in (0, 1).
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise EmptyPoolError("calibration set is empty")
    wake = labels != NEGATIVE
    if not wake.any() or wake.all():
        raise EmptyPoolError("calibration set needs both wake and non-wake utterances")

    best = peaks.max(axis=1)
    correct = peaks.argmax(axis=1) == labels
    accepted_peaks = np.sort(best[wake & correct])
    negative_peaks = np.sort(best[~wake])
    n_wake = int(wake.sum())
    n_non = int((~wake).sum())

    chosen = None
    chosen_score = math.inf
    for threshold in np.unique(best):
        n_accepted = accepted_peaks.size - int(np.searchsorted(accepted_peaks, threshold, side="left"))
        n_fa = negative_peaks.size - int(np.searchsorted(negative_peaks, threshold, side="left"))
        s = score(EvalCounts(n_wake=n_wake, n_non_wake=n_non, n_fr=n_wake - n_accepted, n_fa=n_fa)).score
        if s <= chosen_score:
            chosen, chosen_score = float(threshold), s
    return float(np.clip(chosen, _THRESHOLD_MIN, _THRESHOLD_MAX))


def report_from_peaks(peaks: np.ndarray, utts: Sequence[Utterance], threshold: float) -> ScoreReport:
    labels = _labels(utts)
    counts = counts_at_threshold(peaks, labels, threshold)
    rates = score(counts)

    by_speaker: Dict[str, List[int]] = defaultdict(list)
    for i, utt in enumerate(utts):
        by_speaker[utt.speaker_id].append(i)
    per_speaker = {
        spk: _rates_or_none(counts_at_threshold(peaks[idx], labels[idx], threshold))
        for spk, idx in sorted(by_speaker.items())
    }
    return ScoreReport(
        frr=rates.frr, far=rates.far, score=rates.score,
        threshold=threshold, counts=counts, per_speaker=per_speaker,
    )


# -------- Checkpoint-level operations --------

def _checked_model(checkpoint: str | Path, cmvn: CmvnStats):
    params, config = load_checkpoint(checkpoint)
    if cmvn.dim != config.input_dim:
        raise ConfigMismatchError(f"CMVN has {cmvn.dim} dims, checkpoint expects {config.input_dim}")
    return params, config


def calibrate_threshold(
    checkpoint: str | Path,
    dev_utts: Sequence[Utterance],
    cmvn: CmvnStats,
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
    threads: int = 1,
) -> float:
    if not dev_utts:
        raise EmptyPoolError("dev set is empty")
    params, config = _checked_model(checkpoint, cmvn)
    feats = load_utterance_features(dev_utts, cmvn, feature_config, audio_root, threads)
    return calibrate_from_peaks(peak_posteriors(params, config, feats, threads), _labels(dev_utts))


def evaluate(
    checkpoint: str | Path,
    utts: Sequence[Utterance],
    cmvn: CmvnStats,
    threshold: float,
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
    threads: int = 1,
) -> ScoreReport:
    if not utts:
        raise EmptyPoolError("evaluation set is empty")
    params, config = _checked_model(checkpoint, cmvn)
    feats = load_utterance_features(utts, cmvn, feature_config, audio_root, threads)
    report = report_from_peaks(peak_posteriors(params, config, feats, threads), utts, threshold)
    logger.info(
        "Evaluated %d utterances at threshold %.4f: FRR %.4f FAR %.4f score %.4f",
        len(utts), threshold, report.frr, report.far, report.score,
    )
    return report


# -------- Analysis --------

def intelligibility_correlation(
    records: Iterable[IntelligibilityRecord],
    scores: Mapping[str, float],
    measure: str = "subjective",
) -> Dict[str, float]:
    """Pearson and Spearman between an intelligibility measure (x) and wake-up score (y)."""
    if measure not in ("subjective", "objective"):
        raise ValueError(f"unknown intelligibility measure {measure!r}")
    by_speaker = {r.speaker_id: getattr(r, measure) for r in records}
    speakers = sorted(s for s in by_speaker if s in scores and scores[s] is not None)
    if len(speakers) < 3:
        raise EmptyInputError(f"need at least 3 speakers with both measures, got {len(speakers)}")
    x = np.array([by_speaker[s] for s in speakers], dtype=np.float64)
    y = np.array([scores[s] for s in speakers], dtype=np.float64)
    if np.ptp(x) == 0.0:
        raise ZeroVarianceError("intelligibility values have zero variance")
    if np.ptp(y) == 0.0:
        raise ZeroVarianceError("wake-up scores have zero variance")
    return {
        "pearson": float(sps.pearsonr(x, y)[0]),
        "spearman": float(sps.spearmanr(x, y)[0]),
        "n": len(speakers),
    }


def relative_improvement(before: Optional[float], after: Optional[float]) -> Optional[float]:
    """(before - after) / before for lower-is-better scores; None when undefined."""
    if before is None or after is None or before == 0:
        return None
    return (before - after) / before


def per_speaker_frame(report: ScoreReport) -> pd.DataFrame:
    rows = [
        {"speaker_id": spk, "frr": s.frr, "far": s.far, "score": s.score,
         "n_wake": s.counts.n_wake, "n_non_wake": s.counts.n_non_wake}
        for spk, s in sorted(report.per_speaker.items())
    ]
    return pd.DataFrame(rows, columns=["speaker_id", "frr", "far", "score", "n_wake", "n_non_wake"])


def compare_reports(reports: Mapping[str, ScoreReport]) -> pd.DataFrame:
    """
    One row per speaker (plus "overall"), a score column per model in the
    given order and the relative improvement between consecutive models.
    """
    names = list(reports)
    speakers = sorted({spk for r in reports.values() for spk in r.per_speaker})
    rows = []
    for spk in speakers + ["overall"]:
        row: Dict[str, object] = {"speaker_id": spk}
        for name in names:
            r = reports[name]
            if spk == "overall":
                row[name] = r.score
            else:
                entry = r.per_speaker.get(spk)
                row[name] = entry.score if entry is not None else None
        for prev, nxt in zip(names, names[1:]):
            row[f"{prev}_to_{nxt}"] = relative_improvement(row[prev], row[nxt])
        rows.append(row)
    columns = ["speaker_id", *names, *[f"{a}_to_{b}" for a, b in zip(names, names[1:])]]
    return pd.DataFrame(rows, columns=columns)
