from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from wws.config import RunConfig, load_run_config, settings
from wws.errors import EmptyInputError, MissingPathError, UsageError, WWSError
from wws.extensions import configure_logging, get_logger
from wws.models import CmvnStats, FeatureConfig, ScoreReport, Stage, Subset, TrainConfig, Utterance
from wws.services.corpus import (
    corpus_stats,
    corpus_stats_frame,
    intelligibility_frame,
    load_annotations,
    load_hypotheses,
    load_manifest,
    score_intelligibility,
    select_subset,
)
from wws.services.dsp import compute_cmvn, load_cmvn, save_cmvn
from wws.services.evaluation import (
    calibrate_threshold,
    compare_reports,
    evaluate,
    intelligibility_correlation,
    load_utterance_features,
    per_speaker_frame,
)
from wws.services.sweep import enrollment_sweep
from wws.services.train import run_sdd, train_stage
from wws.utils import read_json, write_csv, write_json

logger = get_logger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class Context:
    args: argparse.Namespace
    run: RunConfig
    seed: int
    threads: int
    features: FeatureConfig

    def path(self, flag_value: Optional[str], config_value: Optional[Path], flag: str, must_exist: bool = True) -> Path:
        value = flag_value if flag_value is not None else config_value
        if value is None:
            raise UsageError(f"{flag} is required (flag or config file)")
        path = Path(value)
        if must_exist and not path.exists():
            raise MissingPathError(f"{flag}: {path} does not exist")
        return path

    def output_dir(self) -> Path:
        value = getattr(self.args, "out_dir", None) or self.run.paths.output_dir or settings.OUTPUT_DIR
        return Path(value)

    def manifest(self) -> tuple[List[Utterance], Path]:
        path = self.path(self.args.manifest, self.run.paths.manifest, "--manifest")
        utts = load_manifest(path, num_keywords=self.run.model.num_keywords)
        return utts, path.parent

    def cmvn(self) -> CmvnStats:
        return load_cmvn(self.path(self.args.cmvn, self.run.paths.cmvn, "--cmvn"))

    def train_config(self, stage: Stage, init: Optional[Path] = None) -> TrainConfig:
        config = self.run.train.to_config(stage, self.seed, init)
        return dataclasses.replace(config, threads=self.threads)


# -------- Commands --------

def cmd_cmvn(ctx: Context) -> int:
    utts, root = ctx.manifest()
    utts = select_subset(utts, ctx.args.subset)
    if not utts:
        raise EmptyInputError(f"no utterances in subset {ctx.args.subset!r}")
    feats = load_utterance_features(utts, None, ctx.features, root, ctx.threads)
    stats = compute_cmvn(feats)
    out = save_cmvn(stats, ctx.path(ctx.args.out, ctx.run.paths.cmvn, "--out", must_exist=False))
    print(f"Wrote {out} ({stats.frame_count} frames)")
    return 0


def _train(ctx: Context, stage: Stage, init: Optional[Path]) -> int:
    utts, root = ctx.manifest()
    cmvn = ctx.cmvn()
    model_config = ctx.run.model.to_config(cmvn.dim) if stage is Stage.SIC else None
    report = train_stage(
        ctx.train_config(stage, init),
        select_subset(utts, Subset.TRAIN),
        select_subset(utts, ctx.run.eval.dev_subset),
        cmvn,
        ctx.run.augment.to_config(ctx.seed),
        ctx.output_dir(),
        model_config=model_config,
        feature_config=ctx.features,
        audio_root=root,
    )
    print(f"Best {stage.value} checkpoint: {ctx.output_dir() / report.best_checkpoint} (epoch {report.best_epoch})")
    return 0


def cmd_train(ctx: Context) -> int:
    return _train(ctx, Stage.SIC, None)


def cmd_finetune(ctx: Context) -> int:
    return _train(ctx, Stage.SID, ctx.path(ctx.args.init, None, "--init"))


def cmd_enroll(ctx: Context) -> int:
    utts, root = ctx.manifest()
    init = ctx.path(ctx.args.init, ctx.run.paths.init_checkpoint, "--init")
    best = run_sdd(
        init,
        ctx.args.speakers,
        ctx.run.enrollment.to_spec(ctx.seed),
        ctx.train_config(Stage.SDD, init),
        utts,
        ctx.cmvn(),
        ctx.run.augment.to_config(ctx.seed),
        ctx.output_dir(),
        dev_subset=ctx.run.eval.dev_subset,
        feature_config=ctx.features,
        audio_root=root,
    )
    for speaker, ckpt in best.items():
        print(f"{speaker}: {ckpt}")
    return 0


def cmd_evaluate(ctx: Context) -> int:
    threshold = ctx.args.threshold if ctx.args.threshold is not None else ctx.run.eval.threshold
    if threshold is not None and not 0.0 < threshold < 1.0:
        raise UsageError("--threshold must lie in (0, 1)")
    utts, root = ctx.manifest()
    cmvn = ctx.cmvn()
    checkpoint = ctx.path(ctx.args.checkpoint, None, "--checkpoint")
    if threshold is None:
        threshold = calibrate_threshold(
            checkpoint, select_subset(utts, ctx.run.eval.dev_subset), cmvn,
            ctx.features, root, ctx.threads,
        )
    subset = ctx.args.subset or ctx.run.eval.subset
    report = evaluate(checkpoint, select_subset(utts, subset), cmvn, threshold, ctx.features, root, ctx.threads)
    out = write_json(report.to_json(), ctx.path(ctx.args.out, None, "--out", must_exist=False))
    print(f"Wrote {out}: FRR {report.frr:.4f} FAR {report.far:.4f} score {report.score:.4f}")
    if ctx.args.per_speaker:
        print(f"Wrote {write_csv(per_speaker_frame(report), ctx.args.per_speaker)}")
    return 0


def cmd_sweep(ctx: Context) -> int:
    utts, root = ctx.manifest()
    ev = ctx.run.eval
    frame = enrollment_sweep(
        ctx.path(ctx.args.init, ctx.run.paths.init_checkpoint, "--init"),
        ctx.args.speaker,
        utts,
        ctx.cmvn(),
        ctx.train_config(Stage.SDD),
        ctx.run.augment.to_config(ctx.seed),
        ctx.output_dir(),
        ratios=ev.sweep_ratios,
        durations_s=ev.sweep_durations_s,
        positive_duration_s=ctx.run.enrollment.positive_duration_s,
        duration_ratio=ev.sweep_duration_ratio,
        test_subset=ev.subset,
        dev_subset=ev.dev_subset,
        feature_config=ctx.features,
        audio_root=root,
    )
    print(f"Wrote {write_csv(frame, ctx.path(ctx.args.out, None, '--out', must_exist=False))} ({len(frame)} rows)")
    return 0


def cmd_stats(ctx: Context) -> int:
    utts, _ = ctx.manifest()
    frame = corpus_stats_frame(corpus_stats(utts))
    print(frame.to_string(index=False))
    if ctx.args.out:
        print(f"Wrote {write_csv(frame, ctx.args.out)}")
    return 0


def cmd_intel(ctx: Context) -> int:
    utts, _ = ctx.manifest()
    records = score_intelligibility(
        utts,
        load_hypotheses(ctx.path(ctx.args.hypotheses, None, "--hypotheses")),
        load_annotations(ctx.path(ctx.args.annotations, None, "--annotations")),
    )
    print(f"Wrote {write_csv(intelligibility_frame(records), ctx.path(ctx.args.out, None, '--out', must_exist=False))}")
    if ctx.args.report:
        report = ScoreReport.from_json(read_json(ctx.path(ctx.args.report, None, "--report")))
        scores = {spk: s.score for spk, s in report.per_speaker.items()}
        corr = intelligibility_correlation(records, scores, measure=ctx.args.measure)
        print(f"{ctx.args.measure} vs score over {corr['n']} speakers: "
              f"pearson {corr['pearson']:.4f} spearman {corr['spearman']:.4f}")
        if ctx.args.correlation_out:
            print(f"Wrote {write_json(corr, ctx.args.correlation_out)}")
    return 0


def cmd_compare(ctx: Context) -> int:
    reports: Dict[str, ScoreReport] = {}
    for item in ctx.args.reports:
        name, sep, path = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--reports expects NAME=PATH, got {item!r}")
        reports[name] = ScoreReport.from_json(read_json(ctx.path(path, None, f"--reports {name}")))
    frame = compare_reports(reports)
    print(frame.to_string(index=False))
    if ctx.args.out:
        print(f"Wrote {write_csv(frame, ctx.args.out)}")
    return 0


# -------- Parser --------

def _common() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run config.")
    common.add_argument("--seed", type=int, help="Overrides the config file and WWS_SEED.")
    common.add_argument("--threads", type=int, help="Worker threads for feature extraction and scoring.")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR.")
    return common


def build_parser() -> ArgumentParser:
    common = _common()
    parser = ArgumentParser(prog="wws", description="Wake-word spotting: features, training, enrollment and scoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[Context], int], help_text: str) -> ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("cmvn", cmd_cmvn, "Compute global CMVN statistics over a manifest subset.")
    p.add_argument("--manifest")
    p.add_argument("--subset", default="train")
    p.add_argument("--out", help="CMVN JSON path.")

    for name, handler, text in (
        ("train", cmd_train, "Train the speaker-independent control (SIC) model."),
        ("finetune", cmd_finetune, "Fine-tune SIC into the speaker-independent dysarthric (SID) model."),
    ):
        p = add(name, handler, text)
        p.add_argument("--manifest")
        p.add_argument("--cmvn")
        p.add_argument("--out-dir")
        if name == "finetune":
            p.add_argument("--init", required=True, help="SIC checkpoint to start from.")

    p = add("enroll", cmd_enroll, "Fine-tune one speaker-dependent (SDD) model per speaker.")
    p.add_argument("--manifest")
    p.add_argument("--cmvn")
    p.add_argument("--out-dir")
    p.add_argument("--init", help="SID checkpoint to start from.")
    p.add_argument("--speakers", nargs="+", required=True)

    p = add("evaluate", cmd_evaluate, "Score a checkpoint on a manifest subset.")
    p.add_argument("--manifest")
    p.add_argument("--cmvn")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--subset")
    p.add_argument("--threshold", type=float, help="Skip dev calibration and use this threshold.")
    p.add_argument("--out", required=True, help="ScoreReport JSON path.")
    p.add_argument("--per-speaker", help="Optional per-speaker CSV path.")

    p = add("sweep", cmd_sweep, "Enrollment ratio and duration sweep for one speaker.")
    p.add_argument("--manifest")
    p.add_argument("--cmvn")
    p.add_argument("--init", help="SID checkpoint to start from.")
    p.add_argument("--speaker", required=True)
    p.add_argument("--out-dir", help="Working directory for per-cell checkpoints.")
    p.add_argument("--out", required=True, help="CSV path.")

    p = add("stats", cmd_stats, "Per-subset hours, speakers and utterances.")
    p.add_argument("--manifest")
    p.add_argument("--out", help="Optional CSV path.")

    p = add("intel", cmd_intel, "Subjective and objective intelligibility per speaker.")
    p.add_argument("--manifest")
    p.add_argument("--hypotheses", required=True, help="utt_id<TAB>ASR text per line.")
    p.add_argument("--annotations", required=True, help="CSV speaker_id,annotator,accuracy.")
    p.add_argument("--out", required=True, help="CSV path.")
    p.add_argument("--report", help="ScoreReport JSON to correlate against.")
    p.add_argument("--measure", choices=["subjective", "objective"], default="subjective")
    p.add_argument("--correlation-out", help="Optional JSON path for the correlation.")

    p = add("compare", cmd_compare, "Per-speaker score table across models.")
    p.add_argument("--reports", nargs="+", required=True, metavar="NAME=PATH")
    p.add_argument("--out", help="Optional CSV path.")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    configure_logging(args.log_level or settings.LOG_LEVEL)
    try:
        run = load_run_config(args.config)
        ctx = Context(
            args=args,
            run=run,
            seed=run.resolved_seed(args.seed),
            threads=run.resolved_threads(args.threads),
            features=run.features.to_config(),
        )
        return args.handler(ctx)
    except WWSError as e:
        logger.error("%s", e)
        return e.exit_code
    except ValueError as e:
        # invalid values that reached a domain type
        logger.error("%s", e)
        return 2
