from __future__ import annotations

import dataclasses

import pytest

from wws.config import RunConfig, Settings, load_run_config
from wws.errors import UsageError
from wws.models import AugmentConfig, ModelConfig, Stage, Subset, TrainConfig


def _write(tmp_path, text: str):
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_no_path_gives_defaults():
    run = load_run_config(None)
    assert run.model.to_config(40) == ModelConfig()
    assert run.augment.to_config(0) == AugmentConfig()
    assert run.eval.sweep_ratios == [float(r) for r in range(11)]
    assert (run.eval.subset, run.eval.dev_subset) == (Subset.TEST, Subset.DEV)


def test_sections_map_onto_domain_types(tmp_path):
    run = load_run_config(_write(tmp_path, """
[model]
hidden_dim = 16
dilations = [1, 2]
num_blocks = 2

[train]
epochs = 3
learning_rate = 0.01

[enrollment]
positive_duration_s = 20.0
ratio_negative = 2.0
"""))
    assert run.model.to_config(40).dilations == (1, 2)
    train = run.train.to_config(Stage.SID, 5, None)
    assert train == TrainConfig(stage=Stage.SID, learning_rate=0.01, epochs=3, seed=5)
    spec = run.enrollment.to_spec(7)
    assert (spec.positive_duration_s, spec.ratio_negative, spec.seed) == (20.0, 2.0, 7)


def test_stage_learning_rate_defaults():
    run = RunConfig()
    assert run.train.to_config(Stage.SIC, 0, None).learning_rate == 1e-3
    assert run.train.to_config(Stage.SDD, 0, None).learning_rate == 1e-4


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("WWS_SEED", "11")
    assert RunConfig().resolved_seed() == 11
    assert RunConfig(seed=3).resolved_seed() == 3
    assert RunConfig.model_validate({"seed": 3, "train": {"seed": 4}}).resolved_seed() == 4
    assert RunConfig.model_validate({"seed": 3, "train": {"seed": 4}}).resolved_seed(9) == 9


def test_threads_never_below_one(monkeypatch):
    monkeypatch.delenv("WWS_THREADS", raising=False)
    assert RunConfig(threads=0).resolved_threads() == 1
    assert RunConfig().resolved_threads(4) == 4


@pytest.mark.parametrize("text", [
    "[train]\nepoch = 3\n",
    "colour = 'blue'\n",
    "[eval]\nthreshold = 1.0\n",
    "[model\n",
    "[eval]\nsubset = 'tset'\n",
    "[eval]\ndev_subset = 'validation'\n",
])
def test_bad_files_are_usage_errors(tmp_path, text):
    with pytest.raises(UsageError):
        load_run_config(_write(tmp_path, text))


def test_missing_file_is_a_usage_error(tmp_path):
    with pytest.raises(UsageError):
        load_run_config(tmp_path / "absent.toml")


def test_settings_only_carry_runtime_knobs():
    names = {f.name for f in dataclasses.fields(Settings)}
    assert names == {"SEED", "THREADS", "LOG_LEVEL", "OUTPUT_DIR", "CHECKPOINT_MAGIC", "CHECKPOINT_VERSION"}
