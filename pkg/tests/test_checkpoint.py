from __future__ import annotations

import struct

import numpy as np
import pytest

from wws.errors import BadMagicError, ConfigMismatchError, TruncatedCheckpointError, VersionMismatchError
from wws.models import ModelConfig, ModelParams
from wws.services.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from wws.services.nnet import init_params


def _float32_params(config: ModelConfig, seed: int) -> ModelParams:
    rng = np.random.default_rng(seed)
    return ModelParams({
        name: rng.normal(size=shape).astype(np.float32).astype(np.float64)
        for name, shape in config.shapes()
    })


def test_round_trip_is_bit_identical(tmp_path, tiny_config):
    params = _float32_params(tiny_config, 0)
    path = save_checkpoint(params, tiny_config, tmp_path / "m.ckpt")
    loaded, config = load_checkpoint(path)
    assert config == tiny_config
    assert loaded.equals(params)


def test_fresh_init_round_trips(tmp_path):
    config = ModelConfig()
    params = init_params(config, 11)
    loaded, _ = load_checkpoint(save_checkpoint(params, config, tmp_path / "init.ckpt"))
    assert loaded.equals(params)


def test_file_layout(tiny_config):
    blob = encode_checkpoint(_float32_params(tiny_config, 1), tiny_config)
    magic, version, config_len = struct.unpack_from("<4sII", blob)
    assert magic == b"WWS1"
    assert version == 1
    n_floats = sum(int(np.prod(shape)) for _, shape in tiny_config.shapes())
    assert len(blob) == 12 + config_len + 4 * n_floats


def test_corrupted_magic(tiny_config):
    blob = bytearray(encode_checkpoint(_float32_params(tiny_config, 2), tiny_config))
    blob[0:4] = b"XXXX"
    with pytest.raises(BadMagicError):
        decode_checkpoint(bytes(blob))


def test_future_version(tiny_config):
    blob = bytearray(encode_checkpoint(_float32_params(tiny_config, 3), tiny_config))
    struct.pack_into("<I", blob, 4, 2)
    with pytest.raises(VersionMismatchError):
        decode_checkpoint(bytes(blob))


@pytest.mark.parametrize("cut", [3, 10, 20, -1])
def test_truncated_file(tiny_config, cut):
    blob = encode_checkpoint(_float32_params(tiny_config, 4), tiny_config)
    with pytest.raises(TruncatedCheckpointError):
        decode_checkpoint(blob[:cut])


def test_trailing_bytes(tiny_config):
    blob = encode_checkpoint(_float32_params(tiny_config, 5), tiny_config)
    with pytest.raises(TruncatedCheckpointError):
        decode_checkpoint(blob + b"\x00")


def test_params_must_match_config(tiny_config):
    other = ModelConfig(input_dim=7, hidden_dim=8, num_blocks=2, kernel_size=3, dilations=(1, 2), num_keywords=3)
    with pytest.raises(ConfigMismatchError):
        encode_checkpoint(_float32_params(tiny_config, 6), other)
