from __future__ import annotations

import json
import math
import unicodedata
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rapidfuzz.distance import Levenshtein

from wws.errors import (
    DataError,
    DuplicateUtteranceError,
    EmptyInputError,
    EmptyReferenceError,
    InsufficientDataError,
    ManifestParseError,
    UnknownSubsetError,
)
from wws.extensions import get_logger
from wws.models import (
    NEGATIVE,
    CorpusStats,
    EnrollmentSpec,
    IntelligibilityRecord,
    Subset,
    SubsetStats,
    Utterance,
)
from wws.utils import ensure_parent

logger = get_logger(__name__)

MANIFEST_FIELDS = ("utt_id", "speaker_id", "audio_path", "transcript", "keyword_index", "duration_s", "subset")


# -------- Manifest I/O --------

def _parse_record(record: object, path: str, line_no: int, num_keywords: Optional[int]) -> Utterance:
    if not isinstance(record, dict):
        raise ManifestParseError(path, line_no, "record is not a JSON object")
    missing = [k for k in MANIFEST_FIELDS if k not in record]
    if missing:
        raise ManifestParseError(path, line_no, f"missing fields: {', '.join(missing)}")
    extra = sorted(set(record) - set(MANIFEST_FIELDS))
    if extra:
        raise ManifestParseError(path, line_no, f"unknown fields: {', '.join(extra)}")

    try:
        subset = Subset(record["subset"])
    except ValueError:
        raise UnknownSubsetError(str(record["subset"]), line_no) from None

    keyword_index = record["keyword_index"]
    if isinstance(keyword_index, bool) or not isinstance(keyword_index, int):
        raise ManifestParseError(path, line_no, "keyword_index must be an integer")
    if keyword_index != NEGATIVE and (keyword_index < 0 or (num_keywords is not None and keyword_index >= num_keywords)):
        raise ManifestParseError(path, line_no, f"keyword_index {keyword_index} out of range")

    duration = record["duration_s"]
    if isinstance(duration, bool) or not isinstance(duration, (int, float)):
        raise ManifestParseError(path, line_no, "duration_s must be a number")

    for key in ("utt_id", "speaker_id", "audio_path", "transcript"):
        if not isinstance(record[key], str):
            raise ManifestParseError(path, line_no, f"{key} must be a string")

    try:
        return Utterance(
            utt_id=record["utt_id"],
            speaker_id=record["speaker_id"],
            audio_path=record["audio_path"],
            transcript=record["transcript"],
            keyword_index=keyword_index,
            duration_s=duration,
            subset=subset,
        )
    except ValueError as e:
        raise ManifestParseError(path, line_no, str(e)) from e


def load_manifest(path: str | Path, num_keywords: Optional[int] = None) -> List[Utterance]:
    """Read a JSON-lines manifest. Blank lines are skipped."""
    path = Path(path)
    utts: List[Utterance] = []
    seen: Dict[str, int] = {}
    with path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestParseError(str(path), line_no, f"invalid JSON ({e.msg})") from e
            utt = _parse_record(record, str(path), line_no, num_keywords)
            if utt.utt_id in seen:
                raise DuplicateUtteranceError(utt.utt_id, line_no)
            seen[utt.utt_id] = line_no
            utts.append(utt)
    logger.debug("Loaded %d utterances from %s", len(utts), path)
    return utts


def write_manifest(utts: Iterable[Utterance], path: str | Path) -> Path:
    path = ensure_parent(path)
    with path.open("w", encoding="utf-8") as f:
        for utt in utts:
            f.write(json.dumps(utt.to_record(), ensure_ascii=False))
            f.write("\n")
    return path


def select_subset(utts: Iterable[Utterance], subset: Subset | str | None) -> List[Utterance]:
    if subset is None:
        return list(utts)
    subset = Subset(subset)
    return [u for u in utts if u.subset == subset]


def resolve_audio_path(utt: Utterance, manifest_dir: Optional[Path] = None) -> Path:
    """Relative audio paths are taken relative to the manifest's directory."""
    p = Path(utt.audio_path)
    if not p.is_absolute() and manifest_dir is not None:
        p = manifest_dir / p
    return p


# -------- Statistics --------

def corpus_stats(utts: Iterable[Utterance]) -> CorpusStats:
    durations: Dict[Subset, List[float]] = defaultdict(list)
    speakers: Dict[Subset, set] = defaultdict(set)
    for utt in utts:
        durations[utt.subset].append(utt.duration_s)
        speakers[utt.subset].add(utt.speaker_id)

    subsets = {}
    for subset in Subset:
        subsets[subset] = SubsetStats(
            total_hours=math.fsum(durations[subset]) / 3600.0,
            speaker_count=len(speakers[subset]),
            utterance_count=len(durations[subset]),
        )
    return CorpusStats(subsets=subsets)


def corpus_stats_frame(stats: CorpusStats) -> pd.DataFrame:
    rows = [
        {
            "subset": subset.value,
            "total_hours": s.total_hours,
            "speaker_count": s.speaker_count,
            "utterance_count": s.utterance_count,
        }
        for subset, s in stats.subsets.items()
    ]
    return pd.DataFrame(rows, columns=["subset", "total_hours", "speaker_count", "utterance_count"])


# -------- Enrollment --------

def build_enrollment_set(
    utts: Sequence[Utterance],
    speaker: str,
    spec: EnrollmentSpec,
    subset: Subset | str | None = Subset.ENROLL,
) -> List[Utterance]:
    """
    Fixed positives (first-fit in manifest order until the target duration is
    reached) followed by a seeded random draw of the speaker's non-keyword
    utterances covering ratio_negative x the positive duration.
    """
    pool = [u for u in select_subset(utts, subset) if u.speaker_id == speaker]
    positives_pool = [u for u in pool if u.is_wake]
    negatives_pool = [u for u in pool if not u.is_wake]

    available_pos = math.fsum(u.duration_s for u in positives_pool)
    if available_pos < spec.positive_duration_s:
        raise InsufficientDataError(speaker, "positive", spec.positive_duration_s, available_pos)

    positives: List[Utterance] = []
    pos_total = 0.0
    for utt in positives_pool:
        if pos_total >= spec.positive_duration_s:
            break
        positives.append(utt)
        pos_total += utt.duration_s

    neg_target = spec.ratio_negative * pos_total
    negatives: List[Utterance] = []
    if neg_target > 0:
        available_neg = math.fsum(u.duration_s for u in negatives_pool)
        if available_neg < neg_target:
            raise InsufficientDataError(speaker, "negative", neg_target, available_neg)
        rng = np.random.default_rng(spec.seed)
        neg_total = 0.0
        for idx in rng.permutation(len(negatives_pool)):
            if neg_total >= neg_target:
                break
            utt = negatives_pool[int(idx)]
            negatives.append(utt)
            neg_total += utt.duration_s

    logger.debug(
        "Enrollment for %s: %d positives (%.1f s), %d negatives",
        speaker, len(positives), pos_total, len(negatives),
    )
    return positives + negatives


def enrollment_durations(selection: Iterable[Utterance]) -> Tuple[float, float]:
    """(positive seconds, negative seconds) of an enrollment selection."""
    pos = math.fsum(u.duration_s for u in selection if u.is_wake)
    neg = math.fsum(u.duration_s for u in selection if not u.is_wake)
    return pos, neg


# -------- Intelligibility --------

def normalize_transcript(text: str) -> str:
    """Drop whitespace and Unicode punctuation; case is left alone."""
    return "".join(
        ch for ch in text
        if not ch.isspace() and not unicodedata.category(ch).startswith("P")
    )


def edit_distance(a: str, b: str) -> int:
    return int(Levenshtein.distance(a, b))


def char_error_rate(reference: str, hypothesis: str) -> float:
    ref = normalize_transcript(reference)
    if not ref:
        raise EmptyReferenceError("Reference transcript is empty after normalization")
    hyp = normalize_transcript(hypothesis)
    return edit_distance(ref, hyp) / len(ref)


def objective_intelligibility(pairs: Iterable[Tuple[str, str]]) -> float:
    """Corpus-level CER over (reference, hypothesis) pairs: total edits / total reference length."""
    edits = 0
    length = 0
    for reference, hypothesis in pairs:
        ref = normalize_transcript(reference)
        if not ref:
            continue
        edits += edit_distance(ref, normalize_transcript(hypothesis))
        length += len(ref)
    if length == 0:
        raise EmptyReferenceError("No non-empty references to score")
    return edits / length


def subjective_intelligibility(per_annotator_accuracy: Sequence[float]) -> float:
    if len(per_annotator_accuracy) == 0:
        raise EmptyInputError("At least one annotator accuracy is required")
    for value in per_annotator_accuracy:
        if not 0.0 <= value <= 1.0:
            raise DataError(f"Annotator accuracy {value} is outside [0, 1]")
    return math.fsum(per_annotator_accuracy) / len(per_annotator_accuracy)


def load_hypotheses(path: str | Path) -> Dict[str, str]:
    """ASR output, one `utt_id<TAB>text` (or `utt_id text`) per line."""
    hyps: Dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" in line:
                utt_id, text = line.split("\t", 1)
            else:
                parts = line.split(maxsplit=1)
                utt_id, text = parts[0], (parts[1] if len(parts) > 1 else "")
            hyps[utt_id.strip()] = text
    return hyps


def load_annotations(path: str | Path) -> Dict[str, List[float]]:
    """CSV with columns speaker_id, annotator, accuracy -> accuracies per speaker."""
    required = {"speaker_id", "annotator", "accuracy"}
    try:
        frame = pd.read_csv(path, dtype={"speaker_id": str, "annotator": str})
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame()
    if not required.issubset(frame.columns):
        raise DataError(f"{path}: annotation CSV needs columns {', '.join(sorted(required))}")
    per_speaker: Dict[str, List[float]] = defaultdict(list)
    for speaker, accuracy in zip(frame["speaker_id"], frame["accuracy"]):
        per_speaker[speaker].append(float(accuracy))
    return dict(per_speaker)


def score_intelligibility(
    utts: Iterable[Utterance],
    hypotheses: Mapping[str, str],
    annotations: Mapping[str, Sequence[float]],
) -> List[IntelligibilityRecord]:
    """One record per annotated speaker; the objective score uses that speaker's hypotheses."""
    pairs: Dict[str, List[Tuple[str, str]]] = defaultdict(list)
    for utt in utts:
        if utt.utt_id in hypotheses and normalize_transcript(utt.transcript):
            pairs[utt.speaker_id].append((utt.transcript, hypotheses[utt.utt_id]))

    records = []
    for speaker in sorted(annotations):
        if not pairs.get(speaker):
            logger.warning("No ASR hypotheses for speaker %s; skipping", speaker)
            continue
        records.append(IntelligibilityRecord(
            speaker_id=speaker,
            subjective=subjective_intelligibility(annotations[speaker]),
            objective=objective_intelligibility(pairs[speaker]),
        ))
    return records


def intelligibility_frame(records: Iterable[IntelligibilityRecord]) -> pd.DataFrame:
    rows = [{"speaker_id": r.speaker_id, "subjective": r.subjective, "objective": r.objective} for r in records]
    return pd.DataFrame(rows, columns=["speaker_id", "subjective", "objective"])
