"""
Synthetic wake-word corpora.

Keyword k is a fixed sequence of three tones; non-wake utterances are random
three-tone sequences drawn from a grid that shares no frequency with any
keyword. Control speakers add small pitch jitter and light background noise.
Shifted-domain speakers (the dysarthric stand-ins) lower pitch, slow down,
insert pauses and add more noise; test speakers D1..D6 get progressively
stronger shifts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal.windows import tukey

from wws.extensions import get_logger, make_rng
from wws.models import NEGATIVE, SAMPLE_RATE, AudioClip, Subset, Utterance
from wws.services.augment import add_white_noise
from wws.services.corpus import write_manifest
from wws.services.dsp import write_wav
from wws.utils import ensure_parent

logger = get_logger(__name__)

TONE_S = 0.15
NEGATIVE_GRID_HZ = tuple(450.0 + 100.0 * j for j in range(16))


def keyword_tones(keyword: int) -> Tuple[float, float, float]:
    return (400.0 + 100.0 * keyword, 1200.0 + 80.0 * keyword, 700.0 + 120.0 * keyword)


def keyword_transcript(keyword: int) -> str:
    return f"keyword {keyword}"


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    pitch: float = 1.0
    rate: float = 1.0
    pause_s: float = 0.0
    snr_db: float = 25.0
    jitter: float = 0.02
    intelligibility: float = 1.0


@dataclass(frozen=True)
class SubsetPlan:
    """Utterances per speaker: `per_keyword` of every keyword plus `negatives`."""
    per_keyword: int
    negatives: int


@dataclass(frozen=True)
class CorpusProfile:
    num_keywords: int
    control_speakers: int
    shifted_train_speakers: int
    test_speakers: int
    control: Dict[Subset, SubsetPlan] = field(default_factory=dict)
    shifted_train: Dict[Subset, SubsetPlan] = field(default_factory=dict)
    shifted_test: Dict[Subset, SubsetPlan] = field(default_factory=dict)


PROFILES: Dict[str, CorpusProfile] = {
    "tiny": CorpusProfile(
        num_keywords=2,
        control_speakers=2,
        shifted_train_speakers=2,
        test_speakers=2,
        control={Subset.TRAIN: SubsetPlan(5, 5), Subset.DEV: SubsetPlan(2, 3), Subset.TEST: SubsetPlan(2, 3)},
        shifted_train={Subset.TRAIN: SubsetPlan(4, 4), Subset.DEV: SubsetPlan(2, 2)},
        shifted_test={Subset.ENROLL: SubsetPlan(4, 20), Subset.DEV: SubsetPlan(2, 4), Subset.TEST: SubsetPlan(3, 6)},
    ),
    "full": CorpusProfile(
        num_keywords=10,
        control_speakers=5,
        shifted_train_speakers=6,
        test_speakers=6,
        control={Subset.TRAIN: SubsetPlan(10, 40), Subset.DEV: SubsetPlan(1, 10), Subset.TEST: SubsetPlan(2, 20)},
        shifted_train={Subset.TRAIN: SubsetPlan(5, 30), Subset.DEV: SubsetPlan(1, 6)},
        shifted_test={Subset.ENROLL: SubsetPlan(5, 500), Subset.DEV: SubsetPlan(1, 10), Subset.TEST: SubsetPlan(3, 30)},
    ),
}


def control_speakers(count: int) -> List[SpeakerProfile]:
    return [SpeakerProfile(f"C{i + 1:02d}") for i in range(count)]


def shifted_speakers(count: int, prefix: str, seed: int) -> List[SpeakerProfile]:
    """Training speakers spread over the full shift range, in random order."""
    rng = make_rng(seed, "shifted", prefix)
    out = []
    for i in range(count):
        severity = float(rng.uniform(0.1, 1.0))
        out.append(_shifted(f"{prefix}{i + 1:02d}", severity))
    return out


def tester_profiles(count: int) -> List[SpeakerProfile]:
    """D1 mildest to D<count> most severe."""
    return [_shifted(f"D{i + 1}", (i + 1) / count) for i in range(count)]


def _shifted(speaker_id: str, severity: float) -> SpeakerProfile:
    return SpeakerProfile(
        speaker_id=speaker_id,
        pitch=1.0 - 0.18 * severity,
        rate=1.0 + 0.9 * severity,
        pause_s=0.12 * severity,
        snr_db=20.0 - 15.0 * severity,
        jitter=0.02 + 0.04 * severity,
        intelligibility=round(0.95 - 0.6 * severity, 4),
    )


# -------- Signals --------

def render_tones(freqs: Sequence[float], speaker: SpeakerProfile, rng: np.random.Generator) -> np.ndarray:
    tone_n = int(round(TONE_S * speaker.rate * SAMPLE_RATE))
    t = np.arange(tone_n) / SAMPLE_RATE
    envelope = tukey(tone_n, 0.3)
    parts = [np.zeros(int(rng.integers(800, 3200)))]
    for f in freqs:
        f = f * speaker.pitch * (1.0 + rng.uniform(-speaker.jitter, speaker.jitter))
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wave = np.sin(2.0 * math.pi * f * t + phase) + 0.3 * np.sin(4.0 * math.pi * f * t + phase)
        parts.append(0.35 * envelope * wave)
        if speaker.pause_s > 0:
            parts.append(np.zeros(int(round(rng.uniform(0.5, 1.5) * speaker.pause_s * SAMPLE_RATE))))
    parts.append(np.zeros(int(rng.integers(800, 3200))))
    return np.concatenate(parts)


def negative_tones(rng: np.random.Generator) -> Tuple[float, ...]:
    return tuple(float(NEGATIVE_GRID_HZ[int(j)]) for j in rng.integers(0, len(NEGATIVE_GRID_HZ), size=3))


def synth_utterance(keyword: int, speaker: SpeakerProfile, rng: np.random.Generator) -> AudioClip:
    freqs = keyword_tones(keyword) if keyword != NEGATIVE else negative_tones(rng)
    clip = AudioClip(samples=render_tones(freqs, speaker, rng) * rng.uniform(0.5, 1.0), sample_rate=SAMPLE_RATE)
    return add_white_noise(clip, speaker.snr_db, rng)


# -------- Corpus --------

def _speaker_utterances(
    speaker: SpeakerProfile,
    plans: Dict[Subset, SubsetPlan],
    num_keywords: int,
    out_dir: Path,
    seed: int,
) -> List[Utterance]:
    utts = []
    for subset, plan in plans.items():
        labels = [k for k in range(num_keywords) for _ in range(plan.per_keyword)] + [NEGATIVE] * plan.negatives
        for i, label in enumerate(labels):
            utt_id = f"{speaker.speaker_id}_{subset.value}_{i:04d}"
            clip = synth_utterance(label, speaker, make_rng(seed, utt_id))
            rel = Path("wav") / speaker.speaker_id / f"{utt_id}.wav"
            write_wav(clip, out_dir / rel)
            utts.append(Utterance(
                utt_id=utt_id,
                speaker_id=speaker.speaker_id,
                audio_path=rel.as_posix(),
                transcript=keyword_transcript(label) if label != NEGATIVE else "other speech",
                keyword_index=label,
                duration_s=len(clip) / SAMPLE_RATE,
                subset=subset,
            ))
    return utts


def _corrupt(text: str, error_rate: float, rng: np.random.Generator) -> str:
    chars = [c for c in text if rng.random() >= error_rate]
    return "".join(chars)


def write_intelligibility_inputs(
    speakers: Sequence[SpeakerProfile],
    utts: Sequence[Utterance],
    out_dir: Path,
    seed: int,
    annotators: int = 3,
) -> Tuple[Path, Path]:
    """Annotator accuracies and ASR-style hypotheses that degrade with severity."""
    by_id = {s.speaker_id: s for s in speakers}
    rows = []
    for spk in speakers:
        rng = make_rng(seed, "annotate", spk.speaker_id)
        for a in range(annotators):
            acc = float(np.clip(spk.intelligibility + rng.uniform(-0.03, 0.03), 0.0, 1.0))
            rows.append({"speaker_id": spk.speaker_id, "annotator": f"A{a + 1}", "accuracy": round(acc, 4)})
    annotations = ensure_parent(out_dir / "annotations.csv")
    pd.DataFrame(rows, columns=["speaker_id", "annotator", "accuracy"]).to_csv(annotations, index=False, lineterminator="\n")

    hypotheses = ensure_parent(out_dir / "hypotheses.tsv")
    with hypotheses.open("w", encoding="utf-8") as f:
        for utt in utts:
            spk = by_id.get(utt.speaker_id)
            if spk is None:
                continue
            rng = make_rng(seed, "asr", utt.utt_id)
            f.write(f"{utt.utt_id}\t{_corrupt(utt.transcript, 1.0 - spk.intelligibility, rng)}\n")
    return annotations, hypotheses


def make_corpus(out_dir: str | Path, profile: str = "tiny", seed: int = 0) -> Dict[str, Path]:
    """
    Write `control/manifest.jsonl` (train/dev/test) and `shifted/manifest.jsonl`
    (training speakers with train/dev, test speakers with enroll/dev/test),
    plus annotations and hypotheses for the test speakers.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown corpus profile {profile!r}; choose from {sorted(PROFILES)}")
    plan = PROFILES[profile]
    out_dir = Path(out_dir)

    control_dir = out_dir / "control"
    control: List[Utterance] = []
    for spk in control_speakers(plan.control_speakers):
        control += _speaker_utterances(spk, plan.control, plan.num_keywords, control_dir, seed)
    control_manifest = write_manifest(control, control_dir / "manifest.jsonl")

    shifted_dir = out_dir / "shifted"
    shifted: List[Utterance] = []
    for spk in shifted_speakers(plan.shifted_train_speakers, "S", seed):
        shifted += _speaker_utterances(spk, plan.shifted_train, plan.num_keywords, shifted_dir, seed)
    testers = tester_profiles(plan.test_speakers)
    tester_utts: List[Utterance] = []
    for spk in testers:
        tester_utts += _speaker_utterances(spk, plan.shifted_test, plan.num_keywords, shifted_dir, seed)
    shifted_manifest = write_manifest(shifted + tester_utts, shifted_dir / "manifest.jsonl")

    test_only = [u for u in tester_utts if u.subset == Subset.TEST]
    annotations, hypotheses = write_intelligibility_inputs(testers, test_only, shifted_dir, seed)
    logger.info("Synthetic %s corpus: %d control and %d shifted utterances", profile, len(control), len(shifted) + len(tester_utts))
    return {
        "control": control_manifest,
        "shifted": shifted_manifest,
        "annotations": annotations,
        "hypotheses": hypotheses,
    }
