import math

import numpy as np
import pandas as pd
import pytest

from base.exceptions import ConfigurationError
from belief.services.shemas import Belief
from dynamics.services.shemas import ModelEnsemble, ModelKind
from harness.clients.run import RunClient, file_sha256
from harness.services.pipeline import (
    METRIC_COLUMNS,
    ExperimentService,
    metrics_frame,
    run_ablation,
    with_variant,
)
from harness.services.shemas import ExperimentConfig
from harness.tests.configs import TINY_LIQUIDATION, tiny_config
from liquidation.services.shemas import HOLD_ACTION
from mdp.clients.artifacts import ArtifactClient
from mdp.services.evaluation import expected_return
from pspo.services.improvement import closed_form_optimal_policy
from pspo.services.operators import OperatorContext, OperatorTag, exact_fixed_point
from pspo.tests.instances import true_model

ARTIFACTS = ["dataset.ndjson", "mdp.json", "ensemble.json", "policy.json", "q.json", "metrics.csv"]


def full_run(config, path):
    service = ExperimentService(config, path)
    service.generate_data()
    service.train_dynamics()
    result = service.train_policy()
    reports = service.evaluate()

    return service, result, reports


def test_pipeline_is_byte_reproducible(tmp_path):
    config = tiny_config()
    full_run(config, tmp_path / "a")
    full_run(config, tmp_path / "b")
    for name in ARTIFACTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_regenerated_dataset_has_same_hash(tmp_path):
    service = ExperimentService(tiny_config(), tmp_path)
    service.generate_data()
    first = RunClient(tmp_path).load_manifest().artifacts["dataset.ndjson"]
    service.generate_data()
    assert RunClient(tmp_path).load_manifest().artifacts["dataset.ndjson"] == first
    assert ExperimentService(tiny_config(seed=1), tmp_path / "other").generate_data() is not None
    assert file_sha256(tmp_path / "other" / "dataset.ndjson") != first


def test_metrics_csv_schema(tmp_path):
    _, result, _ = full_run(tiny_config(), tmp_path)
    frame = pd.read_csv(tmp_path / "metrics.csv")
    assert len(frame) == len(result.reports) == 3
    assert list(frame.columns) == METRIC_COLUMNS + ["prior_0", "prior_1", "posterior_0", "posterior_1"]
    assert list(frame.columns[:4]) == ["seed", "iteration", "variant", "beta"]
    assert set(frame["variant"]) == {"full"}
    assert (tmp_path / "metrics.csv").read_text(encoding="utf-8").splitlines()[0].startswith("seed,iteration,variant")


def test_empty_metrics_keep_header():
    assert list(metrics_frame([], seed=0).columns) == METRIC_COLUMNS


def test_ablation_tag_in_metrics(tmp_path):
    config = with_variant(tiny_config(iterations=2), "average_utilization")
    full_run(config, tmp_path)
    assert set(pd.read_csv(tmp_path / "metrics.csv")["variant"]) == {"average_utilization"}


def test_unknown_variant():
    with pytest.raises(ConfigurationError):
        with_variant(tiny_config(), "no_such_variant")


def test_manifest_reconstructs_run(tmp_path):
    config = tiny_config()
    full_run(config, tmp_path)
    manifest = RunClient(tmp_path).load_manifest()
    assert ExperimentConfig.parse_obj(manifest.config) == config
    for name in ARTIFACTS + ["coverage.csv", "uncertainty.csv", "evaluation.json"]:
        assert manifest.artifacts[name] == file_sha256(tmp_path / name)
    assert set(manifest.timings) == {"gen_data", "train_dynamics", "train_pspo", "eval"}
    assert manifest.checks == {"variance_ok": True, "trust_region_ok": True}


def test_coverage_report(tmp_path):
    ExperimentService(tiny_config(), tmp_path).generate_data()
    coverage = pd.read_csv(tmp_path / "coverage.csv")
    assert len(coverage) == 8
    assert coverage["count"].sum() == 400


def test_random_behavior_policy(tmp_path):
    service = ExperimentService(tiny_config(instance={"n_states": 4, "n_actions": 2, "behavior": "random"}), tmp_path)
    mdp = service.true_mdp()
    behavior = service.behavior(mdp)
    np.testing.assert_allclose(behavior.probs.sum(axis=1), 1.0)
    np.testing.assert_array_equal(behavior.probs, service.behavior(mdp).probs)


def test_tabular_evaluation_is_exact(tmp_path):
    service, _, reports = full_run(tiny_config(), tmp_path)
    mdp = service.load_mdp()
    assert reports[0].exact
    assert reports[0].mean_return == expected_return(mdp, service.load_policy())

    # оптимальная политика по истинной модели
    reference = service.behavior(mdp)
    context = OperatorContext(
        ensemble=ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[true_model(mdp)]),
        belief=Belief.uniform(1),
        gamma=mdp.gamma,
        alpha=0.5,
        reference=reference,
    )
    optimal = closed_form_optimal_policy(exact_fixed_point(OperatorTag.OPTIMALITY, context), reference, 0.5)
    ArtifactClient(tmp_path).save_policy(optimal)
    assert service.evaluate()[0].mean_return == pytest.approx(expected_return(mdp, optimal), abs=1e-8)


def test_baselines_in_tabular_evaluation(tmp_path):
    service, _, _ = full_run(tiny_config(), tmp_path)
    reports = service.evaluate(include_baselines=True)
    assert [report.policy for report in reports] == ["policy", "behavior"]


def test_missing_inputs(tmp_path):
    service = ExperimentService(tiny_config(), tmp_path)
    with pytest.raises(ConfigurationError):
        service.train_dynamics()
    with pytest.raises(ConfigurationError):
        service.evaluate()


def test_training_without_saved_ensemble(tmp_path):
    service = ExperimentService(tiny_config(iterations=1), tmp_path)
    service.generate_data()
    result = service.train_policy()
    assert result.ensemble.size == 2


def test_liquidation_pipeline(tmp_path):
    config = tiny_config(TINY_LIQUIDATION)
    service = ExperimentService(config, tmp_path)
    dataset = service.generate_data()
    assert len(dataset) <= 30 * 10
    assert 0.6 <= float(np.mean(dataset.actions == HOLD_ACTION)) <= 0.95

    ensemble = service.train_dynamics()
    assert ensemble.size == 2
    service.train_policy()
    assert len(pd.read_csv(tmp_path / "uncertainty.csv")) == 2 * 32

    reports = service.evaluate(include_baselines=True)
    assert [report.policy for report in reports] == [
        "policy",
        "behavior",
        "immediate",
        "uniform_twap",
        "oracle_threshold",
    ]
    for report in reports:
        assert report.n_episodes == 10
        assert math.isfinite(report.normalized_score)
        assert report.normalized_score == pytest.approx(100.0 * report.mean_return / 135.0)


def test_ablation_summary(tmp_path):
    summary = run_ablation(tiny_config(iterations=2), seeds=[0, 1], output_dir=tmp_path)
    assert list(summary["variant"]) == ["full", "average_utilization", "without_regularization"]
    assert list(summary["n_seeds"]) == [2, 2, 2]
    assert summary["median_score"].isna().all()
    for seed in (0, 1):
        assert (tmp_path / f"seed_{seed}" / "dataset.ndjson").exists()
        for variant in ("full", "average_utilization", "without_regularization"):
            assert len(pd.read_csv(tmp_path / f"seed_{seed}" / variant / "metrics.csv")) == 2
    assert len(pd.read_csv(tmp_path / "ablation_summary.csv")) == 3
