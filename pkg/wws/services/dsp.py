from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import soundfile as sf
from scipy.signal import get_window

from wws.errors import (
    ClipTooShortError,
    DimensionMismatchError,
    NotEnoughFramesError,
    UnsupportedEncodingError,
    WrongChannelCountError,
    WrongSampleRateError,
)
from wws.extensions import get_logger
from wws.models import SAMPLE_RATE, AudioClip, CmvnStats, FeatureConfig, FeatureMatrix
from wws.utils import ensure_parent

logger = get_logger(__name__)

LOG_FLOOR = 1e-10
VARIANCE_FLOOR = 1e-8
PCM16_SCALE = 32768.0


# -------- Audio I/O --------

def read_wav(path: str | Path) -> AudioClip:
    """Decode a 16 kHz mono PCM16 WAV into floats in [-1, 1) (value / 32768)."""
    path = Path(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise UnsupportedEncodingError(f"{path}: not a readable audio file ({e})") from e
    if info.format != "WAV" or info.subtype != "PCM_16":
        raise UnsupportedEncodingError(f"{path}: expected PCM_16 WAV, got {info.format}/{info.subtype}")
    if info.samplerate != SAMPLE_RATE:
        raise WrongSampleRateError(f"{path}: sample rate {info.samplerate} Hz, expected {SAMPLE_RATE} Hz")
    if info.channels != 1:
        raise WrongChannelCountError(f"{path}: {info.channels} channels, expected mono")
    data, _ = sf.read(str(path), dtype="int16", always_2d=False)
    return AudioClip(samples=data.astype(np.float64) / PCM16_SCALE, sample_rate=SAMPLE_RATE)


def write_wav(clip: AudioClip, path: str | Path) -> Path:
    """Final write stage: clip to [-1, 1] and quantize to PCM16."""
    path = ensure_parent(path)
    pcm = np.clip(np.round(np.clip(clip.samples, -1.0, 1.0) * PCM16_SCALE), -32768, 32767).astype(np.int16)
    sf.write(str(path), pcm, clip.sample_rate, subtype="PCM_16", format="WAV")
    return path


# -------- Log-mel front-end --------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _mel_edges(n_mels: int, sample_rate: int) -> np.ndarray:
    max_mel = hz_to_mel(sample_rate / 2.0)
    return mel_to_hz(np.linspace(0.0, max_mel, n_mels + 2))


def mel_center_frequencies(config: FeatureConfig = FeatureConfig(), sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    return _mel_edges(config.n_mels, sample_rate)[1:-1]


@lru_cache(maxsize=8)
def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """(fft_size // 2 + 1) x n_mels triangular filters spanning 0 Hz to Nyquist."""
    edges = _mel_edges(n_mels, sample_rate)
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    fb = np.zeros((bin_freqs.shape[0], n_mels))
    for m in range(n_mels):
        left, center, right = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        fb[:, m] = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


@lru_cache(maxsize=8)
def _hann(window: int) -> np.ndarray:
    w = get_window("hann", window, fftbins=True).astype(np.float64)
    w.setflags(write=False)
    return w


def frame_count(num_samples: int, config: FeatureConfig = FeatureConfig()) -> int:
    window = config.window_samples()
    hop = config.hop_samples()
    if num_samples < window:
        return 0
    return (num_samples - window) // hop + 1


def logmel(clip: AudioClip, config: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    window = config.window_samples(clip.sample_rate)
    hop = config.hop_samples(clip.sample_rate)
    if config.fft_size < window:
        raise ValueError(f"fft_size {config.fft_size} is shorter than the window ({window} samples)")
    if len(clip) < window:
        raise ClipTooShortError(f"clip has {len(clip)} samples, one window needs {window}")

    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, window)[::hop]
    spectrum = np.fft.rfft(frames * _hann(window), n=config.fft_size, axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    mel = power @ mel_filterbank(config.n_mels, config.fft_size, clip.sample_rate)
    feats = np.log(np.maximum(mel, LOG_FLOOR))
    return FeatureMatrix(frames=feats, frame_shift_s=config.frame_shift_s, frame_length_s=config.frame_length_s)


def extract_features(path: str | Path, config: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    return logmel(read_wav(path), config)


# -------- Global CMVN --------

class CmvnAccumulator:
    """
    Per-dimension count / mean / sum of squared deviations, merged with the
    pairwise update so partial scans can be combined in any grouping.
    """

    def __init__(self, dim: Optional[int] = None):
        self.count = 0
        self.mean = None if dim is None else np.zeros(dim)
        self.m2 = None if dim is None else np.zeros(dim)

    @property
    def dim(self) -> Optional[int]:
        return None if self.mean is None else int(self.mean.shape[0])

    def _combine(self, count: int, mean: np.ndarray, m2: np.ndarray) -> None:
        if count == 0:
            return
        if self.mean is None:
            self.mean = np.zeros_like(mean)
            self.m2 = np.zeros_like(m2)
        if mean.shape != self.mean.shape:
            raise DimensionMismatchError(f"feature dim {mean.shape[0]} != accumulated dim {self.mean.shape[0]}")
        if self.count == 0:
            self.count, self.mean, self.m2 = count, mean.copy(), m2.copy()
            return
        total = self.count + count
        delta = mean - self.mean
        self.mean = self.mean + delta * (count / total)
        self.m2 = self.m2 + m2 + delta ** 2 * (self.count * count / total)
        self.count = total

    def update(self, features: FeatureMatrix | np.ndarray) -> "CmvnAccumulator":
        frames = features.frames if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
        if frames.shape[0] == 0:
            return self
        mean = frames.mean(axis=0)
        m2 = ((frames - mean) ** 2).sum(axis=0)
        self._combine(int(frames.shape[0]), mean, m2)
        return self

    def merge(self, other: "CmvnAccumulator") -> "CmvnAccumulator":
        if other.count:
            self._combine(other.count, other.mean, other.m2)
        return self

    def finalize(self) -> CmvnStats:
        if self.count < 2:
            raise NotEnoughFramesError(f"CMVN needs at least 2 frames, got {self.count}")
        return CmvnStats(mean=self.mean.copy(), variance=self.m2 / self.count, frame_count=self.count)


def compute_cmvn(features: Iterable[FeatureMatrix]) -> CmvnStats:
    acc = CmvnAccumulator()
    for feats in features:
        acc.update(feats)
    return acc.finalize()


def _check_dim(features: FeatureMatrix, stats: CmvnStats) -> None:
    if features.dim != stats.dim:
        raise DimensionMismatchError(f"feature dim {features.dim} != CMVN dim {stats.dim}")


def apply_cmvn(features: FeatureMatrix, stats: CmvnStats) -> FeatureMatrix:
    _check_dim(features, stats)
    return features.with_frames((features.frames - stats.mean) / np.sqrt(stats.variance + VARIANCE_FLOOR))


def invert_cmvn(features: FeatureMatrix, stats: CmvnStats) -> FeatureMatrix:
    _check_dim(features, stats)
    return features.with_frames(features.frames * np.sqrt(stats.variance + VARIANCE_FLOOR) + stats.mean)


def save_cmvn(stats: CmvnStats, path: str | Path) -> Path:
    path = ensure_parent(path)
    with path.open("w", encoding="utf-8") as f:
        json.dump(stats.to_json(), f, indent=2)
        f.write("\n")
    return path


def load_cmvn(path: str | Path) -> CmvnStats:
    with Path(path).open("r", encoding="utf-8") as f:
        return CmvnStats.from_json(json.load(f))
