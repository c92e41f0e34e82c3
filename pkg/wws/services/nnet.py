"""
DS-TCN keyword model with hand-written forward and reverse-mode passes.

Per frame: linear projection -> blocks of (causal dilated depthwise conv ->
pointwise conv -> ReLU -> residual add) -> K sigmoid heads. All math is
float64; shapes are T x channels throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from wws.errors import DimensionMismatchError
from wws.models import FeatureMatrix, ModelConfig, ModelParams, Posteriors


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Glorot-uniform weights (rounded to float32 precision), zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in config.shapes():
        if name.endswith("bias"):
            tensors[name] = np.zeros(shape)
            continue
        if name.endswith("depthwise"):
            fan_in = fan_out = config.kernel_size
        else:
            fan_in, fan_out = shape
        limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
        bound = np.float32(limit)
        if float(bound) > limit:
            bound = np.nextafter(bound, np.float32(0.0))
        w = rng.uniform(-float(bound), float(bound), size=shape).astype(np.float32)
        tensors[name] = np.clip(w, -bound, bound).astype(np.float64)
    return ModelParams(tensors)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class _BlockCache:
    padded: np.ndarray   # (pad + T) x H block input with causal zeros on top
    pre_relu: np.ndarray  # T x H pointwise output
    depthwise_out: np.ndarray


@dataclass
class ForwardCache:
    inputs: np.ndarray
    blocks: List[_BlockCache] = field(default_factory=list)
    hidden: np.ndarray | None = None
    logits: np.ndarray | None = None


def _as_frames(features: FeatureMatrix | np.ndarray) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.frames
    return np.asarray(features, dtype=np.float64)


def _depthwise(padded: np.ndarray, kernel: np.ndarray, dilation: int, num_frames: int) -> np.ndarray:
    # out[t, c] = sum_j kernel[c, j] * padded[t + j * dilation, c]
    out = np.zeros((num_frames, padded.shape[1]))
    for j in range(kernel.shape[1]):
        off = j * dilation
        out += padded[off:off + num_frames] * kernel[:, j]
    return out


def forward_with_cache(params: ModelParams, config: ModelConfig, features: FeatureMatrix | np.ndarray) -> Tuple[Posteriors, ForwardCache]:
    x = _as_frames(features)
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise DimensionMismatchError(f"expected T x {config.input_dim} features, got shape {x.shape}")
    num_frames = x.shape[0]
    cache = ForwardCache(inputs=x)

    h = x @ params["preproc.weight"] + params["preproc.bias"]
    for i, dilation in enumerate(config.dilations):
        pad = (config.kernel_size - 1) * dilation
        padded = np.concatenate([np.zeros((pad, h.shape[1])), h], axis=0)
        d = _depthwise(padded, params[f"blocks.{i}.depthwise"], dilation, num_frames)
        z = d @ params[f"blocks.{i}.pointwise"] + params[f"blocks.{i}.pointwise_bias"]
        cache.blocks.append(_BlockCache(padded=padded, pre_relu=z, depthwise_out=d))
        h = h + np.maximum(z, 0.0)

    logits = h @ params["heads.weight"] + params["heads.bias"]
    cache.hidden = h
    cache.logits = logits
    return _sigmoid(logits), cache


def forward(params: ModelParams, config: ModelConfig, features: FeatureMatrix | np.ndarray) -> Posteriors:
    posteriors, _ = forward_with_cache(params, config, features)
    return posteriors


def backward(
    params: ModelParams,
    config: ModelConfig,
    features: FeatureMatrix | np.ndarray,
    grad_posteriors: np.ndarray,
    cache: ForwardCache | None = None,
) -> Tuple[ModelParams, np.ndarray]:
    """
    Exact gradients of sum(grad_posteriors * forward(features)) w.r.t. params
    and input. Pass the cache from forward_with_cache to skip the re-run.
    """
    if cache is None:
        _, cache = forward_with_cache(params, config, features)
    posteriors = _sigmoid(cache.logits)
    grad_posteriors = np.asarray(grad_posteriors, dtype=np.float64)
    if grad_posteriors.shape != posteriors.shape:
        raise DimensionMismatchError(f"grad shape {grad_posteriors.shape} != posterior shape {posteriors.shape}")

    grads = params.zeros_like()
    num_frames = cache.inputs.shape[0]

    d_logits = grad_posteriors * posteriors * (1.0 - posteriors)
    grads["heads.weight"] = cache.hidden.T @ d_logits
    grads["heads.bias"] = d_logits.sum(axis=0)
    d_h = d_logits @ params["heads.weight"].T

    for i in reversed(range(config.num_blocks)):
        dilation = config.dilations[i]
        block = cache.blocks[i]
        kernel = params[f"blocks.{i}.depthwise"]

        d_z = d_h * (block.pre_relu > 0.0)
        grads[f"blocks.{i}.pointwise"] = block.depthwise_out.T @ d_z
        grads[f"blocks.{i}.pointwise_bias"] = d_z.sum(axis=0)
        d_d = d_z @ params[f"blocks.{i}.pointwise"].T

        d_padded = np.zeros_like(block.padded)
        d_kernel = np.zeros_like(kernel)
        for j in range(kernel.shape[1]):
            off = j * dilation
            window = block.padded[off:off + num_frames]
            d_kernel[:, j] = (d_d * window).sum(axis=0)
            d_padded[off:off + num_frames] += d_d * kernel[:, j]
        grads[f"blocks.{i}.depthwise"] = d_kernel

        pad = (config.kernel_size - 1) * dilation
        # residual path plus the conv path
        d_h = d_h + d_padded[pad:]

    grads["preproc.weight"] = cache.inputs.T @ d_h
    grads["preproc.bias"] = d_h.sum(axis=0)
    d_input = d_h @ params["preproc.weight"].T
    return grads, d_input
