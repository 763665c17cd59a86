import json

import pytest

from base.exceptions import ConfigurationError
from harness.services.config import environment_overrides, load_experiment_config, merge_documents
from harness.services.shemas import CheckSuite, ExperimentConfig, Track
from harness.tests.configs import write_config
from pspo.services.shemas import PspoConfig


def test_environment_overrides():
    overrides = environment_overrides(
        {
            "PSPO__ALPHA": "0.5",
            "PSPO__LIQUIDATION__HORIZON": "50",
            "PSPO__NAME": "sweep",
            "PSPO__SUITES": '["contraction"]',
            "PSPO_OUTPUT_DIR": "ignored",
            "HOME": "/root",
        }
    )
    assert overrides == {"alpha": 0.5, "liquidation": {"horizon": 50}, "name": "sweep", "suites": ["contraction"]}


def test_malformed_override():
    with pytest.raises(ConfigurationError):
        environment_overrides({"PSPO__LIQUIDATION__": "1"})


def test_merge_is_recursive():
    merged = merge_documents({"a": 1, "liquidation": {"horizon": 10, "rate_cap": 3.0}}, {"liquidation": {"horizon": 5}})
    assert merged == {"a": 1, "liquidation": {"horizon": 5, "rate_cap": 3.0}}


def test_precedence(tmp_path):
    path = write_config(tmp_path / "config.json", alpha=0.3, seed=4)
    config = load_experiment_config(path, environ={"PSPO__ALPHA": "0.7", "PSPO__INSTANCE__N_STATES": "6"})
    assert config.alpha == 0.7
    assert config.seed == 4
    assert config.instance.n_states == 6
    assert config.instance.n_actions == 2

    flagged = load_experiment_config(path, environ={"PSPO__SEED": "5"}, overrides={"seed": 9})
    assert flagged.seed == 9


def test_defaults_without_file():
    config = load_experiment_config(environ={})
    assert config.track == Track.TABULAR
    assert config.suites == list(CheckSuite)
    assert config.ablation_seeds == [0, 1, 2, 3]
    assert config.n_eval_episodes == 100


@pytest.mark.parametrize(
    "document",
    [
        {"alpha": -1.0},
        {"ensemble_size": 5, "model_pool_size": 2},
        {"track": "atari"},
        {"seed": -3},
        {"liquidation": {"action_grid": [0.5, 1.0]}},
    ],
)
def test_invalid_config(tmp_path, document):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_experiment_config(path, environ={})


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigurationError):
        load_experiment_config(tmp_path / "missing.json", environ={})
    broken = tmp_path / "broken.json"
    broken.write_text("{alpha: 1", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_experiment_config(broken, environ={})
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_experiment_config(listed, environ={})


def test_training_config_and_snapshot(tmp_path):
    config = load_experiment_config(write_config(tmp_path / "config.json", without_regularization=True), environ={})
    pspo = config.pspo
    assert type(pspo) is PspoConfig
    assert pspo.variant == config.variant == "without_regularization_uniform_mu"
    assert pspo.model_pool_size == 3

    snapshot = config.snapshot()
    assert snapshot["instance"]["behavior"] == "uniform"
    assert ExperimentConfig.parse_obj(snapshot) == config
