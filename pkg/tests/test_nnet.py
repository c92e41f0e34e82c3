from __future__ import annotations

import numpy as np
import pytest

from wws.errors import DimensionMismatchError
from wws.models import FeatureMatrix, ModelConfig, ModelParams
from wws.services.nnet import backward, forward, forward_with_cache, init_params
from wws.services.train import utterance_loss

GRAD_CONFIG = ModelConfig(input_dim=5, hidden_dim=8, num_blocks=2, kernel_size=3, dilations=(1, 2), num_keywords=3)


def _random_params(config: ModelConfig, seed: int, scale: float = 0.5) -> ModelParams:
    rng = np.random.default_rng(seed)
    return ModelParams({name: rng.normal(scale=scale, size=shape) for name, shape in config.shapes()})


# -------- init --------

def test_init_is_deterministic():
    a = init_params(ModelConfig(), 3)
    b = init_params(ModelConfig(), 3)
    assert a.equals(b)
    assert not a.equals(init_params(ModelConfig(), 4))


def test_init_biases_zero_and_weights_bounded():
    config = ModelConfig()
    params = init_params(config, 0)
    for name, shape in config.shapes():
        w = params[name]
        assert w.shape == shape
        if name.endswith("bias"):
            assert not w.any()
            continue
        fan_in, fan_out = (config.kernel_size, config.kernel_size) if name.endswith("depthwise") else shape
        assert np.max(np.abs(w)) <= np.sqrt(6.0 / (fan_in + fan_out))
        np.testing.assert_array_equal(w.astype(np.float32).astype(np.float64), w)


# -------- forward --------

def test_single_frame_input_keeps_its_shape():
    config = ModelConfig(input_dim=40)
    out = forward(init_params(config, 0), config, np.zeros((1, 40)))
    assert out.shape == (1, 10)
    assert np.all((out > 0) & (out < 1))


def test_zero_params_give_one_half(tiny_config):
    params = init_params(tiny_config, 0).scale_(0.0)
    out = forward(params, tiny_config, np.random.default_rng(0).normal(size=(7, 6)))
    np.testing.assert_array_equal(out, np.full((7, 3), 0.5))


@pytest.mark.parametrize("num_frames", [1, 2, 5, 33])
def test_output_frames_match_input_frames(tiny_config, num_frames):
    params = init_params(tiny_config, 1)
    assert forward(params, tiny_config, np.ones((num_frames, 6))).shape == (num_frames, 3)


def test_forward_accepts_feature_matrix(tiny_config):
    params = init_params(tiny_config, 2)
    x = np.random.default_rng(2).normal(size=(9, 6))
    np.testing.assert_array_equal(forward(params, tiny_config, FeatureMatrix(frames=x)), forward(params, tiny_config, x))


def test_dimension_mismatch(tiny_config):
    with pytest.raises(DimensionMismatchError):
        forward(init_params(tiny_config, 0), tiny_config, np.zeros((4, 5)))


def test_causality_and_receptive_field(tiny_config):
    params = _random_params(tiny_config, 5)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 6))
    base = forward(params, tiny_config, x)
    rf = tiny_config.receptive_field
    for t in (0, 7, 18, 29):
        bumped = x.copy()
        bumped[t] += rng.normal(size=6)
        changed = np.flatnonzero(np.any(forward(params, tiny_config, bumped) != base, axis=1))
        assert changed.min() >= t
        assert changed.max() <= min(29, t + rf - 1)


# -------- backward --------

def test_zero_upstream_gives_zero_gradients(tiny_config):
    params = _random_params(tiny_config, 0)
    x = np.random.default_rng(0).normal(size=(8, 6))
    grads, d_input = backward(params, tiny_config, x, np.zeros((8, 3)))
    assert all(not g.any() for _, g in grads.items())
    assert not d_input.any()


def test_backward_is_linear_in_upstream(tiny_config):
    params = _random_params(tiny_config, 1)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10, 6))
    g1, g2 = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
    both, _ = backward(params, tiny_config, x, g1 + g2)
    summed, _ = backward(params, tiny_config, x, g1)
    summed.add_(backward(params, tiny_config, x, g2)[0])
    for name, g in both.items():
        np.testing.assert_allclose(g, summed[name], rtol=1e-12, atol=1e-14)


def test_backward_reuses_a_forward_cache(tiny_config):
    params = _random_params(tiny_config, 2)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 6))
    upstream = rng.normal(size=(6, 3))
    _, cache = forward_with_cache(params, tiny_config, x)
    a, da = backward(params, tiny_config, x, upstream)
    b, db = backward(params, tiny_config, x, upstream, cache=cache)
    assert a.equals(b)
    np.testing.assert_array_equal(da, db)


def _loss(params: ModelParams, x: np.ndarray, label: int) -> float:
    return utterance_loss(forward(params, GRAD_CONFIG, x), label)[0]


def _away_from_kinks(params: ModelParams, x: np.ndarray, margin: float = 1e-3) -> bool:
    """No near-tied pooling maxima and no ReLU input near zero."""
    posteriors, cache = forward_with_cache(params, GRAD_CONFIG, x)
    top2 = np.sort(posteriors, axis=0)[-2:]
    if not np.all(top2[1] - top2[0] > margin):
        return False
    return all(np.min(np.abs(block.pre_relu)) > margin for block in cache.blocks)


def test_gradients_match_finite_differences():
    step = 1e-4
    checked = 0
    for seed in range(200):
        if checked == 20:
            break
        rng = np.random.default_rng(seed)
        params = _random_params(GRAD_CONFIG, seed)
        x = rng.normal(size=(12, 5))
        label = int(rng.integers(-1, 3))
        if not _away_from_kinks(params, x):
            continue
        posteriors = forward(params, GRAD_CONFIG, x)

        _, grad_post = utterance_loss(posteriors, label)
        grads, d_input = backward(params, GRAD_CONFIG, x, grad_post)
        for name, g in grads.items():
            tensor = params[name]
            numeric = np.zeros_like(tensor)
            for idx in np.ndindex(tensor.shape):
                orig = tensor[idx]
                tensor[idx] = orig + step
                up = _loss(params, x, label)
                tensor[idx] = orig - step
                down = _loss(params, x, label)
                tensor[idx] = orig
                numeric[idx] = (up - down) / (2 * step)
            err = np.abs(g - numeric)
            assert np.all(err <= 1e-4 * np.maximum(np.abs(g), np.abs(numeric)) + 1e-6), (seed, name)

        numeric_x = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            x[idx] = orig + step
            up = _loss(params, x, label)
            x[idx] = orig - step
            down = _loss(params, x, label)
            x[idx] = orig
            numeric_x[idx] = (up - down) / (2 * step)
        assert np.all(np.abs(d_input - numeric_x) <= 1e-4 * np.maximum(np.abs(d_input), np.abs(numeric_x)) + 1e-6)
        checked += 1
    assert checked == 20
