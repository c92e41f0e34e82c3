from __future__ import annotations

import hashlib
import logging

import numpy as np

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_logger(name: str) -> logging.Logger:
    """Module logger under the `wws` namespace."""
    if not name.startswith("wws"):
        name = f"wws.{name}"
    return logging.getLogger(name)


def configure_logging(level: str | int = "INFO") -> None:
    """Install one stream handler on the `wws` logger. Called by the CLI only."""
    root = logging.getLogger("wws")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root.setLevel(level)
    if not any(getattr(h, "_wws_handler", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._wws_handler = True
        root.addHandler(handler)


def derive_seed(seed: int, *keys: object) -> int:
    """
    Deterministically mix a global seed with keys (utt_id, epoch, ...).
    Same inputs give the same 63-bit seed on every platform and run.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode("utf-8"))
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode("utf-8"))
    return int.from_bytes(h.digest(), "little") >> 1


def make_rng(seed: int, *keys: object) -> np.random.Generator:
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.default_rng(seed)
