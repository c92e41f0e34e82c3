from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from conftest import utterance
from wws.errors import ConfigMismatchError, EmptyInputError, EmptyPoolError, ZeroVarianceError
from wws.models import (
    NEGATIVE,
    CmvnStats,
    Detection,
    EvalCounts,
    IntelligibilityRecord,
    ModelConfig,
    ModelParams,
    ScoreReport,
    SpeakerScore,
    Subset,
)
from wws.services.checkpoint import save_checkpoint
from wws.services.corpus import select_subset
from wws.services.evaluation import (
    calibrate_from_peaks,
    calibrate_threshold,
    compare_reports,
    count_utterance,
    counts_at_threshold,
    detect,
    evaluate,
    intelligibility_correlation,
    per_speaker_frame,
    relative_improvement,
    report_from_peaks,
    score,
)

# -------- detect --------

def test_low_posteriors_do_not_fire():
    d = detect(np.full((20, 10), 0.01), 0.5)
    assert not d.fired
    assert d.keyword is None
    assert d.peak_posterior == pytest.approx(0.01)


def test_highest_head_fires():
    post = np.full((15, 10), 0.1)
    post[7, 3] = 0.9
    d = detect(post, 0.5)
    assert d == Detection(fired=True, keyword=3, peak_posterior=0.9)


def test_threshold_equal_to_peak_fires():
    post = np.array([[0.2, 0.7], [0.7, 0.3]])
    d = detect(post, 0.7)
    assert d.fired
    assert d.keyword == 0


# -------- score --------

def test_score_examples():
    assert score(EvalCounts(n_wake=10, n_non_wake=10)).score == 0.0
    rates = score(EvalCounts(n_wake=100, n_non_wake=200, n_fr=3, n_fa=2))
    assert rates.frr == pytest.approx(0.03)
    assert rates.far == pytest.approx(0.01)
    assert rates.score == pytest.approx(0.04)


def test_rounded_rates_add_up_within_rounding():
    total = 0.1630 + 0.3708
    assert abs(total - 0.5339) <= 1e-4 + 1e-12


def test_score_matches_recomputation():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n_wake, n_non = int(rng.integers(1, 500)), int(rng.integers(1, 500))
        n_fr, n_fa = int(rng.integers(0, n_wake + 1)), int(rng.integers(0, n_non + 1))
        rates = score(EvalCounts(n_wake, n_non, n_fr, n_fa))
        assert rates.frr == n_fr / n_wake
        assert rates.far == n_fa / n_non
        assert rates.score == n_fr / n_wake + n_fa / n_non
        assert 0.0 <= rates.score <= 2.0
        assert (rates.score == 0.0) == (n_fr == 0 and n_fa == 0)


def test_score_needs_both_pools():
    with pytest.raises(EmptyPoolError):
        score(EvalCounts(n_wake=0, n_non_wake=5))
    with pytest.raises(EmptyPoolError):
        score(EvalCounts(n_wake=5, n_non_wake=0))


# -------- counting --------

def test_count_utterance_rules():
    fired0 = Detection(True, 0, 0.9)
    quiet = Detection(False, None, 0.2)
    assert count_utterance(fired0, 0) == EvalCounts(n_wake=1)
    assert count_utterance(fired0, 1) == EvalCounts(n_wake=1, n_fr=1)
    assert count_utterance(quiet, 1) == EvalCounts(n_wake=1, n_fr=1)
    assert count_utterance(fired0, NEGATIVE) == EvalCounts(n_non_wake=1, n_fa=1)
    assert count_utterance(quiet, NEGATIVE) == EvalCounts(n_non_wake=1)


def _random_peaks(seed: int, n: int = 60, k: int = 4):
    rng = np.random.default_rng(seed)
    peaks = rng.uniform(0, 1, size=(n, k))
    labels = rng.integers(-1, k, size=n)
    return peaks, labels


@pytest.mark.parametrize("seed", range(5))
def test_vectorized_counts_equal_brute_force(seed):
    peaks, labels = _random_peaks(seed)
    for threshold in (0.1, 0.5, 0.77, 0.95):
        total = EvalCounts()
        for row, label in zip(peaks, labels):
            total = total + count_utterance(detect(row[None, :], threshold), int(label))
        assert counts_at_threshold(peaks, labels, threshold) == total


def test_counts_are_additive_over_disjoint_sets():
    peaks, labels = _random_peaks(10, n=80)
    whole = counts_at_threshold(peaks, labels, 0.6)
    parts = counts_at_threshold(peaks[:33], labels[:33], 0.6) + counts_at_threshold(peaks[33:], labels[33:], 0.6)
    assert whole == parts


def test_threshold_monotonicity():
    peaks, labels = _random_peaks(3, n=200)
    previous = None
    for threshold in np.linspace(0.0, 1.0, 2001):
        counts = counts_at_threshold(peaks, labels, float(threshold))
        if previous is not None:
            assert counts.n_fa <= previous.n_fa
            assert counts.n_fr >= previous.n_fr
        previous = counts


# -------- calibration --------

def test_separated_peaks_calibrate_to_zero_score():
    peaks = np.array([[0.95, 0.02], [0.03, 0.91], [0.05, 0.08], [0.1, 0.01]])
    labels = np.array([0, 1, NEGATIVE, NEGATIVE])
    threshold = calibrate_from_peaks(peaks, labels)
    assert score(counts_at_threshold(peaks, labels, threshold)).score == 0.0
    assert threshold == pytest.approx(0.91)


def test_equal_peaks_return_that_value():
    peaks = np.full((4, 2), 0.4)
    labels = np.array([0, 0, NEGATIVE, NEGATIVE])
    assert calibrate_from_peaks(peaks, labels) == pytest.approx(0.4)


@pytest.mark.parametrize("seed", range(5))
def test_calibration_beats_a_dense_grid(seed):
    peaks, labels = _random_peaks(seed, n=40)
    threshold = calibrate_from_peaks(peaks, labels)
    best = peaks.max(axis=1)
    assert threshold in set(best.tolist())
    chosen = score(counts_at_threshold(peaks, labels, threshold)).score
    for t in np.linspace(best.min(), best.max(), 10001):
        assert chosen <= score(counts_at_threshold(peaks, labels, float(t))).score


def test_calibration_needs_both_classes():
    with pytest.raises(EmptyPoolError):
        calibrate_from_peaks(np.full((3, 2), 0.5), np.array([0, 1, 0]))
    with pytest.raises(EmptyPoolError):
        calibrate_from_peaks(np.zeros((0, 2)), np.array([], dtype=np.int64))


def test_saturated_peaks_keep_the_threshold_inside_the_unit_interval():
    peaks = np.array([[1.0, 0.0], [0.0, 1.0], [0.2, 0.0], [0.0, 0.0]])
    labels = np.array([0, 1, NEGATIVE, NEGATIVE])
    threshold = calibrate_from_peaks(peaks, labels)
    assert 0.0 < threshold < 1.0
    assert threshold > 0.2
    assert score(counts_at_threshold(peaks, labels, threshold)).score == 0.0
    assert detect(peaks[:1], threshold).fired

    low = calibrate_from_peaks(np.zeros((2, 2)), np.array([0, NEGATIVE]))
    assert 0.0 < low < 1.0


# -------- reports --------

def test_per_speaker_entries_without_a_class_are_none():
    utts = [
        utterance("a1", "A", 0), utterance("a2", "A", NEGATIVE),
        utterance("c1", "C", 0), utterance("c2", "C", 0),
    ]
    peaks = np.array([[0.9, 0.1], [0.2, 0.1], [0.8, 0.3], [0.1, 0.6]])
    report = report_from_peaks(peaks, utts, 0.5)
    assert report.counts == EvalCounts(n_wake=3, n_non_wake=1, n_fr=1, n_fa=0)
    assert report.per_speaker["A"].score == 0.0
    c = report.per_speaker["C"]
    assert c.frr == 0.5 and c.far is None and c.score is None
    frame = per_speaker_frame(report)
    assert frame["speaker_id"].tolist() == ["A", "C"]
    assert ScoreReport.from_json(report.to_json()) == report


def _constant_model(tmp_path, head_bias):
    config = ModelConfig(input_dim=40, hidden_dim=4, num_blocks=1, kernel_size=2, dilations=(1,), num_keywords=2)
    params = ModelParams({name: np.zeros(shape) for name, shape in config.shapes()})
    params["heads.bias"][:] = head_bias
    return save_checkpoint(params, config, tmp_path / "const.ckpt")


def _unit_cmvn(dim: int = 40) -> CmvnStats:
    return CmvnStats(mean=np.zeros(dim), variance=np.ones(dim), frame_count=2)


def test_model_always_firing_head_zero(tone_corpus, tmp_path):
    utts, root = tone_corpus
    test = select_subset(utts, Subset.TEST)
    report = evaluate(_constant_model(tmp_path, [6.0, -6.0]), test, _unit_cmvn(), 0.5, audio_root=root)
    assert report.far == 1.0
    assert report.frr == 0.5
    assert report.counts == EvalCounts(n_wake=4, n_non_wake=2, n_fr=2, n_fa=2)
    assert report.per_speaker["A"].counts == EvalCounts(n_wake=2, n_non_wake=1, n_fr=1, n_fa=1)


def test_model_never_firing(tone_corpus, tmp_path):
    utts, root = tone_corpus
    test = select_subset(utts, Subset.TEST)
    report = evaluate(_constant_model(tmp_path, [-30.0, -30.0]), test, _unit_cmvn(), 0.5, audio_root=root)
    assert (report.frr, report.far, report.score) == (1.0, 0.0, 1.0)


def test_calibrated_threshold_is_an_observed_peak(tone_corpus, tmp_path):
    utts, root = tone_corpus
    dev = select_subset(utts, Subset.DEV)
    ckpt = _constant_model(tmp_path, [2.0, -1.0])
    assert calibrate_threshold(ckpt, dev, _unit_cmvn(), audio_root=root) == pytest.approx(1 / (1 + np.exp(-2.0)))


def test_evaluate_rejects_wrong_cmvn(tone_corpus, tmp_path):
    utts, root = tone_corpus
    with pytest.raises(ConfigMismatchError):
        evaluate(_constant_model(tmp_path, [0.0, 0.0]), utts, _unit_cmvn(20), 0.5, audio_root=root)
    with pytest.raises(EmptyPoolError):
        evaluate(_constant_model(tmp_path, [0.0, 0.0]), [], _unit_cmvn(), 0.5, audio_root=root)


# -------- analysis --------

def _records(values):
    return [IntelligibilityRecord(f"D{i + 1}", v, 1.0 - v) for i, v in enumerate(values)]


def test_decreasing_scores_have_spearman_minus_one():
    records = _records([0.2, 0.4, 0.6, 0.8])
    scores = {"D1": 0.9, "D2": 0.5, "D3": 0.3, "D4": 0.05}
    corr = intelligibility_correlation(records, scores)
    assert corr["spearman"] == pytest.approx(-1.0)
    assert corr["n"] == 4


def test_linear_relation_has_pearson_one():
    records = _records([0.0, 0.5, 1.0])
    corr = intelligibility_correlation(records, {"D1": 0.0, "D2": 1.0, "D3": 2.0})
    assert corr["pearson"] == pytest.approx(1.0)


def test_spearman_is_invariant_under_monotone_transforms():
    rng = np.random.default_rng(4)
    values = rng.uniform(0.05, 0.95, size=6)
    scores = {f"D{i + 1}": float(s) for i, s in enumerate(rng.uniform(0, 2, size=6))}
    base = intelligibility_correlation(_records(values), scores)["spearman"]
    warped = intelligibility_correlation(_records(values ** 3), {k: float(np.exp(v)) for k, v in scores.items()})["spearman"]
    assert warped == pytest.approx(base)


def test_correlation_rejects_degenerate_inputs():
    with pytest.raises(ZeroVarianceError):
        intelligibility_correlation(_records([0.2, 0.4, 0.6]), {"D1": 0.3, "D2": 0.3, "D3": 0.3})
    with pytest.raises(ZeroVarianceError):
        intelligibility_correlation(_records([0.5, 0.5, 0.5]), {"D1": 0.1, "D2": 0.2, "D3": 0.3})
    with pytest.raises(EmptyInputError):
        intelligibility_correlation(_records([0.2, 0.4, 0.6]), {"D1": 0.1, "D2": 0.2})
    with pytest.raises(ValueError):
        intelligibility_correlation(_records([0.2, 0.4, 0.6]), {"D1": 0.1, "D2": 0.2, "D3": 0.3}, measure="loudness")


def test_objective_measure_is_selectable():
    records = _records([0.2, 0.4, 0.6])
    corr = intelligibility_correlation(records, {"D1": 0.1, "D2": 0.2, "D3": 0.3}, measure="objective")
    assert corr["spearman"] == pytest.approx(-1.0)


def test_relative_improvement():
    assert relative_improvement(0.5, 0.25) == pytest.approx(0.5)
    assert relative_improvement(0.0, 0.1) is None
    assert relative_improvement(None, 0.1) is None


def test_compare_reports_table():
    def report(overall, per):
        return ScoreReport(
            frr=overall, far=0.0, score=overall, threshold=0.5, counts=EvalCounts(10, 10),
            per_speaker={
                spk: SpeakerScore(EvalCounts(n_wake=1, n_non_wake=0), frr=0.0, far=None, score=None)
                for spk in per
            },
        )

    sic = report(0.5, ["D1", "D2"])
    sid = report(0.25, ["D1"])
    frame = compare_reports({"SIC": sic, "SID": sid})
    assert frame.columns.tolist() == ["speaker_id", "SIC", "SID", "SIC_to_SID"]
    assert frame["speaker_id"].tolist() == ["D1", "D2", "overall"]
    overall = frame.set_index("speaker_id").loc["overall"]
    assert overall["SIC_to_SID"] == pytest.approx(0.5)
    # one wake utterance per speaker leaves the score undefined
    assert pd.isna(frame.set_index("speaker_id").loc["D2", "SID"])
