from __future__ import annotations

import dataclasses
import math
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from wws.errors import MaskTooWideError, RatioOutOfRangeError, ZeroPowerError
from wws.models import AudioClip, AugmentConfig, FeatureConfig, FeatureMatrix
from wws.services.dsp import logmel

SPEED_RATIO_BOUNDS = (0.5, 2.0)
MAX_RATIO_DENOMINATOR = 1000


def spec_mask(features: FeatureMatrix, config: AugmentConfig, rng: np.random.Generator) -> FeatureMatrix:
    """Zero `n_freq_masks` contiguous mel bands and `n_time_masks` contiguous frame spans."""
    n_frames, n_bins = features.frames.shape
    if config.freq_mask_width_max > n_bins:
        raise MaskTooWideError(f"freq mask width {config.freq_mask_width_max} exceeds {n_bins} bins")
    if config.time_mask_width_max > n_frames:
        raise MaskTooWideError(f"time mask width {config.time_mask_width_max} exceeds {n_frames} frames")

    out = features.frames.copy()
    for _ in range(config.n_freq_masks):
        width = int(rng.integers(0, config.freq_mask_width_max + 1))
        start = int(rng.integers(0, n_bins - width + 1))
        out[:, start:start + width] = 0.0
    for _ in range(config.n_time_masks):
        width = int(rng.integers(0, config.time_mask_width_max + 1))
        start = int(rng.integers(0, n_frames - width + 1))
        out[start:start + width, :] = 0.0
    return features.with_frames(out)


def speed_perturb(clip: AudioClip, ratio: float) -> AudioClip:
    """
    Play the clip `ratio` times faster at the same sample rate: output has
    round(N / ratio) samples and every frequency is scaled by `ratio`.
    """
    lo, hi = SPEED_RATIO_BOUNDS
    if not lo <= ratio <= hi:
        raise RatioOutOfRangeError(f"speed ratio {ratio} outside [{lo}, {hi}]")
    if ratio == 1.0:
        return AudioClip(samples=clip.samples.copy(), sample_rate=clip.sample_rate)

    target_len = int(round(len(clip) / ratio))
    frac = Fraction(ratio).limit_denominator(MAX_RATIO_DENOMINATOR)
    # faster playback = fewer samples: upsample by q, downsample by p for ratio p/q
    resampled = resample_poly(clip.samples, up=frac.denominator, down=frac.numerator)
    if resampled.shape[0] >= target_len:
        resampled = resampled[:target_len]
    else:
        resampled = np.pad(resampled, (0, target_len - resampled.shape[0]))
    return AudioClip(samples=resampled, sample_rate=clip.sample_rate)


def add_white_noise(clip: AudioClip, snr_db: float, rng: np.random.Generator) -> AudioClip:
    """Add gaussian noise scaled so the empirical SNR of this draw equals `snr_db`. No clipping."""
    signal_power = clip.power
    if signal_power <= 0.0:
        raise ZeroPowerError("cannot set an SNR on a zero-power clip")
    if snr_db == math.inf:
        return AudioClip(samples=clip.samples.copy(), sample_rate=clip.sample_rate)

    noise = rng.standard_normal(len(clip))
    noise_power = float(np.mean(noise ** 2))
    scale = math.sqrt(signal_power / (noise_power * 10.0 ** (snr_db / 10.0)))
    return AudioClip(samples=clip.samples + scale * noise, sample_rate=clip.sample_rate)


def _uniform(rng: np.random.Generator, bounds) -> float:
    lo, hi = bounds
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def augment_utterance(
    clip: AudioClip,
    config: AugmentConfig,
    rng: np.random.Generator,
    feature_config: FeatureConfig = FeatureConfig(),
) -> FeatureMatrix:
    """speed -> noise -> log-mel -> masking, each applied with `apply_probability`."""
    p = config.apply_probability
    if rng.random() < p:
        clip = speed_perturb(clip, _uniform(rng, config.speed_ratio_range))
    if rng.random() < p:
        clip = add_white_noise(clip, _uniform(rng, config.snr_db_range), rng)
    features = logmel(clip, feature_config)
    if rng.random() < p:
        # short utterances cannot hold a full-width mask
        capped = dataclasses.replace(
            config,
            freq_mask_width_max=min(config.freq_mask_width_max, features.dim),
            time_mask_width_max=min(config.time_mask_width_max, features.num_frames),
        )
        features = spec_mask(features, capped, rng)
    return features
