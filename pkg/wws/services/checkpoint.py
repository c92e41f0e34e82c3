"""
Binary checkpoint: magic b"WWS1" | u32 version | u32 config length |
UTF-8 JSON ModelConfig | tensors in canonical order as little-endian float32.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from wws.config import settings
from wws.errors import (
    BadMagicError,
    ConfigMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from wws.models import ModelConfig, ModelParams
from wws.utils import ensure_parent

_HEADER = struct.Struct("<4sII")
_FLOAT = np.dtype("<f4")


def encode_checkpoint(params: ModelParams, config: ModelConfig) -> bytes:
    try:
        params.check_shapes(config)
    except ValueError as e:
        raise ConfigMismatchError(str(e)) from e
    config_blob = json.dumps(config.to_json(), sort_keys=True).encode("utf-8")
    parts = [_HEADER.pack(settings.CHECKPOINT_MAGIC, settings.CHECKPOINT_VERSION, len(config_blob)), config_blob]
    for name, _ in config.shapes():
        parts.append(np.ascontiguousarray(params[name], dtype=_FLOAT).tobytes())
    return b"".join(parts)


def decode_checkpoint(blob: bytes) -> Tuple[ModelParams, ModelConfig]:
    if len(blob) < _HEADER.size:
        if blob[:4] != settings.CHECKPOINT_MAGIC[:len(blob[:4])]:
            raise BadMagicError("not a WWS checkpoint")
        raise TruncatedCheckpointError(f"header needs {_HEADER.size} bytes, file has {len(blob)}")
    magic, version, config_len = _HEADER.unpack_from(blob, 0)
    if magic != settings.CHECKPOINT_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {settings.CHECKPOINT_MAGIC!r}")
    if version != settings.CHECKPOINT_VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, this engine reads {settings.CHECKPOINT_VERSION}")

    offset = _HEADER.size
    if len(blob) < offset + config_len:
        raise TruncatedCheckpointError("config block is cut short")
    try:
        config = ModelConfig.from_json(json.loads(blob[offset:offset + config_len].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError, ValueError) as e:
        raise TruncatedCheckpointError(f"config block is unreadable: {e}") from e
    offset += config_len

    tensors = {}
    for name, shape in config.shapes():
        nbytes = int(np.prod(shape)) * _FLOAT.itemsize
        if len(blob) < offset + nbytes:
            raise TruncatedCheckpointError(f"tensor {name} is cut short")
        arr = np.frombuffer(blob, dtype=_FLOAT, count=int(np.prod(shape)), offset=offset)
        tensors[name] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise TruncatedCheckpointError(f"{len(blob) - offset} unexpected trailing bytes")
    return ModelParams(tensors), config


def save_checkpoint(params: ModelParams, config: ModelConfig, path: str | Path) -> Path:
    path = ensure_parent(path)
    path.write_bytes(encode_checkpoint(params, config))
    return path


def load_checkpoint(path: str | Path) -> Tuple[ModelParams, ModelConfig]:
    return decode_checkpoint(Path(path).read_bytes())
