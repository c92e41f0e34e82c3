from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from wws.models import NEGATIVE, SAMPLE_RATE, AudioClip, ModelConfig, Subset, Utterance
from wws.services.dsp import write_wav


def sine(freq_hz: float, seconds: float = 1.0, amplitude: float = 0.5, phase: float = 0.0) -> AudioClip:
    t = np.arange(int(round(seconds * SAMPLE_RATE))) / SAMPLE_RATE
    return AudioClip(samples=amplitude * np.sin(2.0 * math.pi * freq_hz * t + phase), sample_rate=SAMPLE_RATE)


def utterance(utt_id: str, speaker: str = "spk", keyword: int = NEGATIVE, duration_s: float = 1.0,
              subset: Subset | str = Subset.TRAIN, audio_path: str | None = None, transcript: str = "") -> Utterance:
    return Utterance(
        utt_id=utt_id,
        speaker_id=speaker,
        audio_path=audio_path or f"{utt_id}.wav",
        transcript=transcript,
        keyword_index=keyword,
        duration_s=duration_s,
        subset=Subset(subset),
    )


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(input_dim=6, hidden_dim=8, num_blocks=2, kernel_size=3, dilations=(1, 2), num_keywords=3)


@pytest.fixture
def tone_corpus(tmp_path: Path):
    """
    Two-keyword toy task written to disk: keyword 0 is a 500 Hz tone, keyword 1
    a 1500 Hz tone, negatives are 3000 Hz. Returns (utterances, audio root).
    """
    rng = np.random.default_rng(7)
    freqs = {0: 500.0, 1: 1500.0, NEGATIVE: 3000.0}
    utts = []
    plan = [(Subset.TRAIN, 4), (Subset.DEV, 2), (Subset.TEST, 2)]
    for subset, per_class in plan:
        for label, freq in freqs.items():
            for i in range(per_class):
                utt_id = f"{subset.value}_{label}_{i}"
                clip = sine(freq * (1.0 + rng.uniform(-0.02, 0.02)), seconds=0.4, phase=rng.uniform(0, 6.28))
                noisy = AudioClip(samples=clip.samples + 0.01 * rng.standard_normal(len(clip)), sample_rate=SAMPLE_RATE)
                write_wav(noisy, tmp_path / "wav" / f"{utt_id}.wav")
                speaker = "A" if i % 2 == 0 else "B"
                utts.append(utterance(utt_id, speaker, label, 0.4, subset, audio_path=f"wav/{utt_id}.wav"))
    return utts, tmp_path
