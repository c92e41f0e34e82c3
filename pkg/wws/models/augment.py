from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class AugmentConfig:
    freq_mask_width_max: int = 10
    time_mask_width_max: int = 25
    n_freq_masks: int = 2
    n_time_masks: int = 2
    speed_ratio_range: Tuple[float, float] = (0.9, 1.1)
    snr_db_range: Tuple[float, float] = (-15.0, 15.0)
    apply_probability: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.freq_mask_width_max, self.time_mask_width_max, self.n_freq_masks, self.n_time_masks) < 0:
            raise ValueError("mask widths and counts must be >= 0")
        lo, hi = self.speed_ratio_range
        if not 0 < lo <= hi:
            raise ValueError(f"speed_ratio_range {self.speed_ratio_range} is not an ordered positive range")
        snr_lo, snr_hi = self.snr_db_range
        # +inf on both ends is the "noise disabled" setting
        if math.isnan(snr_lo) or math.isnan(snr_hi) or snr_lo > snr_hi:
            raise ValueError(f"snr_db_range {self.snr_db_range} is not an ordered range")
        if not (math.isfinite(snr_lo) and math.isfinite(snr_hi)) and not (snr_lo == snr_hi == math.inf):
            raise ValueError("snr_db_range endpoints must be finite")
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ValueError("apply_probability must lie in [0, 1]")

    @classmethod
    def disabled(cls, seed: int = 0) -> "AugmentConfig":
        """No augmentation fires; features equal plain log-mel."""
        return cls(apply_probability=0.0, seed=seed)
