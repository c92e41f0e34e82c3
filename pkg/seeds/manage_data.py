from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path

ROOT_PATH = Path(__file__).resolve().parents[1]
if str(ROOT_PATH) not in sys.path:
    sys.path.insert(0, str(ROOT_PATH))

from wws.config import settings
from wws.extensions import configure_logging
from wws.services.corpus import corpus_stats, corpus_stats_frame, load_manifest
from seeds.synthetic import PROFILES, make_corpus


def reset_corpus(out_dir: Path) -> bool:
    if out_dir.exists():
        shutil.rmtree(out_dir)
        return True
    return False


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Synthetic corpus management utilities.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    make = subparsers.add_parser("make-corpus", help="Write control and shifted-domain synthetic corpora.")
    make.add_argument("--out-dir", default="data/synthetic", help="Target directory.")
    make.add_argument("--profile", choices=sorted(PROFILES), default="tiny")
    make.add_argument("--seed", type=int, default=settings.SEED)
    make.add_argument("--reset", action="store_true", help="Delete the target directory first.")

    subparsers.add_parser("list-profiles", help="Show the available corpus profiles.")
    return parser


def main() -> None:
    parser = _build_parser()
    args = parser.parse_args()
    configure_logging(settings.LOG_LEVEL)

    if args.command == "make-corpus":
        out_dir = Path(args.out_dir)
        if args.reset and reset_corpus(out_dir):
            print(f"Removed {out_dir}")
        written = make_corpus(out_dir, profile=args.profile, seed=args.seed)
        for name, path in written.items():
            print(f"Wrote {name}: {path}")
        for name in ("control", "shifted"):
            print(f"\n{name}")
            print(corpus_stats_frame(corpus_stats(load_manifest(written[name]))).to_string(index=False))

    elif args.command == "list-profiles":
        for name, profile in sorted(PROFILES.items()):
            print(
                f"{name}: {profile.num_keywords} keywords, {profile.control_speakers} control, "
                f"{profile.shifted_train_speakers} shifted train, {profile.test_speakers} test speakers"
            )


if __name__ == "__main__":
    main()
