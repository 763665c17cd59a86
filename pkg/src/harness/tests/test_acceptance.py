"""
Воспроизведение задачи ликвидации в уменьшенном масштабе: порядок оценок, абляции и знак корреляции.
"""

import numpy as np
import pytest

from harness.services.checks import CheckRunner
from harness.services.pipeline import ExperimentService, run_ablation, with_variant
from harness.services.shemas import CheckSuite
from harness.tests.configs import tiny_config

SEEDS = [0, 1, 2, 3]

REDUCED_LIQUIDATION = {
    "name": "reduced_liquidation",
    "track": "liquidation",
    "gamma": 0.99,
    "alpha": 1.0,
    "epsilon_trust": 0.01,
    "iterations": 300,
    "ensemble_size": 5,
    "model_pool_size": 5,
    "batch_size": 256,
    "n_rollouts": 64,
    "rollout_horizon": 5,
    "dynamics_epochs": 300,
    "n_eval_episodes": 200,
    "liquidation": {"horizon": 100, "terminal_rule": "expire_worthless", "behavior_hold_prob": 0.8},
    "dataset": {"n_episodes": 500},
}

pytestmark = pytest.mark.slow


@pytest.fixture(name="ablation", scope="module")
def fixture_ablation(tmp_path_factory):
    root = tmp_path_factory.mktemp("reduced_liquidation")
    summary = run_ablation(tiny_config(REDUCED_LIQUIDATION), seeds=SEEDS, output_dir=root)

    return root, summary


def full_run(root, seed):
    config = with_variant(tiny_config(REDUCED_LIQUIDATION, seed=seed), "full")

    return ExperimentService(config, root / f"seed_{seed}" / "full", inputs_dir=root / f"seed_{seed}")


def test_policy_beats_behavior_and_immediate(ablation):
    root, _ = ablation
    scores = {"policy": [], "behavior": [], "immediate": []}
    for seed in SEEDS:
        reports = {report.policy: report for report in full_run(root, seed).evaluate(include_baselines=True)}
        for name, values in scores.items():
            values.append(reports[name].normalized_score)

    policy = np.mean(scores["policy"])
    assert policy >= np.mean(scores["behavior"]) + 5.0
    assert policy >= np.mean(scores["immediate"]) + 5.0


def test_full_method_is_not_outperformed(ablation):
    _, summary = ablation
    medians = dict(zip(summary["variant"], summary["median_score"]))
    assert set(medians) == {"full", "average_utilization", "without_regularization"}
    for variant in ("average_utilization", "without_regularization"):
        assert medians["full"] >= medians[variant], variant


def test_uncertainty_is_negatively_correlated_with_td_targets(ablation):
    root, _ = ablation
    run_dir = root / f"seed_{SEEDS[0]}" / "full"
    (result,) = CheckRunner(tiny_config(REDUCED_LIQUIDATION), quick=True, run_dir=run_dir).run(
        [CheckSuite.CORRELATION]
    )
    assert result.statistics["n_samples"] >= 10_000
    assert result.passed is True, result.statistics
