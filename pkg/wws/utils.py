from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pandas as pd


def ensure_parent(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(data: Any, path: str | Path) -> Path:
    """Stable JSON: sorted keys, UTF-8, trailing newline. Reruns give identical bytes."""
    path = ensure_parent(path)
    with path.open("w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path: str | Path) -> Any:
    with Path(path).open("r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    path = ensure_parent(path)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
    return path
