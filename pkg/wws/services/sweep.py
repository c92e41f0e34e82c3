from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from wws.errors import EmptyPoolError, InsufficientDataError
from wws.extensions import get_logger
from wws.models import (
    AugmentConfig,
    CmvnStats,
    EnrollmentSpec,
    FeatureConfig,
    Rates,
    Subset,
    TrainConfig,
    Utterance,
)
from wws.services.corpus import select_subset
from wws.services.evaluation import evaluate
from wws.services.train import enroll_speaker

logger = get_logger(__name__)

SWEEP_COLUMNS = ["ratio", "duration_s", "frr", "far", "score"]


def sweep_cells(
    ratios: Sequence[float],
    durations_s: Sequence[float],
    positive_duration_s: float = 30.0,
    duration_ratio: float = 5.0,
    seed: int = 0,
) -> List[EnrollmentSpec]:
    """Ratio axis at fixed positive duration, then the total-duration axis at a fixed ratio."""
    cells = [EnrollmentSpec(positive_duration_s, float(r), seed) for r in ratios]
    cells += [EnrollmentSpec.for_total_duration(float(d), duration_ratio, seed) for d in durations_s]
    return cells


def enrollment_sweep(
    sid_checkpoint: str | Path,
    speaker: str,
    utts: Sequence[Utterance],
    cmvn: CmvnStats,
    config: TrainConfig,
    augment: AugmentConfig,
    output_dir: str | Path,
    ratios: Sequence[float] = tuple(float(r) for r in range(11)),
    durations_s: Sequence[float] = (60.0, 120.0, 180.0),
    positive_duration_s: float = 30.0,
    duration_ratio: float = 5.0,
    test_subset: Subset | str = Subset.TEST,
    dev_subset: Subset | str | None = Subset.DEV,
    feature_config: FeatureConfig = FeatureConfig(),
    audio_root: Optional[Path] = None,
) -> pd.DataFrame:
    """
    One SDD fine-tune plus test evaluation per enrollment cell. Cells whose
    enrollment set cannot be built, or that have nothing to calibrate on,
    keep empty metric fields. Identical cells on both axes are trained once.
    """
    output_dir = Path(output_dir)
    test = [u for u in select_subset(utts, test_subset) if u.speaker_id == speaker]
    done: Dict[Tuple[float, float], Optional[Rates]] = {}
    rows = []

    for spec in sweep_cells(ratios, durations_s, positive_duration_s, duration_ratio, config.seed):
        key = (round(spec.ratio_negative, 9), round(spec.positive_duration_s, 9))
        if key not in done:
            cell_dir = output_dir / f"r{spec.ratio_negative:g}_p{spec.positive_duration_s:g}"
            try:
                report = enroll_speaker(
                    sid_checkpoint, speaker, spec, config, utts, cmvn, augment, cell_dir,
                    dev_subset=dev_subset, feature_config=feature_config, audio_root=audio_root,
                )
            except (InsufficientDataError, EmptyPoolError) as e:
                logger.warning("Sweep cell ratio %g, %.1f s skipped: %s", spec.ratio_negative, spec.total_duration_s, e)
                done[key] = None
            else:
                result = evaluate(
                    cell_dir / report.best_checkpoint, test, cmvn, report.best.threshold,
                    feature_config=feature_config, audio_root=audio_root, threads=config.threads,
                )
                done[key] = Rates(result.frr, result.far, result.score)
                logger.info(
                    "Sweep cell ratio %g, %.1f s: FRR %.4f FAR %.4f score %.4f",
                    spec.ratio_negative, spec.total_duration_s, result.frr, result.far, result.score,
                )
        rates = done[key]
        rows.append({
            "ratio": spec.ratio_negative,
            "duration_s": spec.total_duration_s,
            "frr": rates.frr if rates else None,
            "far": rates.far if rates else None,
            "score": rates.score if rates else None,
        })
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
