import numpy as np
import pytest
from scipy.special import softmax

from base.exceptions import ConfigurationError, IterationError
from belief.services.shemas import Belief
from dynamics.services.shemas import ModelEnsemble, ModelKind
from dynamics.tests.affine import AFFINE_ID, AffineFeatures, linear_dataset
from mdp.services.evaluation import expected_return
from mdp.services.generator import behavior_frequencies, generate_tabular_dataset, random_tabular_mdp
from mdp.services.shemas import QFunction, Representation, SoftPolicy, ValueMode
from pspo.services.improvement import closed_form_optimal_policy
from pspo.services.operators import OperatorContext, OperatorTag, iterate_operator
from pspo.services.shemas import (
    EvaluationSolver,
    LearningRateSchedule,
    NoRegularizationMode,
    PspoConfig,
    ScheduleKind,
)
from pspo.services.stochastic import sample_targets
from pspo.services.training import TabularTrainer, pspo_train
from pspo.tests.instances import random_policy, true_model

FAST = {
    "gamma": 0.9,
    "ensemble_size": 3,
    "model_pool_size": 4,
    "batch_size": 32,
    "n_rollouts": 16,
    "rollout_horizon": 2,
}


@pytest.fixture(name="instance")
def instance_fixture():
    mdp = random_tabular_mdp(4, 3, gamma=0.9, seed=3)
    dataset = generate_tabular_dataset(mdp, random_policy(4, 3, seed=3), 400, episode_length=20, seed=3)

    return mdp, dataset


def config(**overrides):
    return PspoConfig(**{**FAST, **overrides})


def test_no_iterations_returns_reference(instance):
    mdp, dataset = instance
    result = pspo_train(dataset, config(iterations=0), seed=0, mdp=mdp)
    reference = behavior_frequencies(dataset, 4, 3, smoothing=1e-3)
    assert result.reports == []
    np.testing.assert_allclose(result.policy.probs, reference.probs)
    assert result.ensemble.size == 3


def test_same_seed_same_reports(instance):
    mdp, dataset = instance
    first = pspo_train(dataset, config(iterations=4), seed=11, mdp=mdp)
    second = pspo_train(dataset, config(iterations=4), seed=11, mdp=mdp)
    assert [report.dict() for report in first.reports] == [report.dict() for report in second.reports]
    np.testing.assert_array_equal(first.policy.probs, second.policy.probs)


def test_regularized_evaluation_improves_objective(instance):
    mdp, dataset = instance
    seen = []
    result = pspo_train(
        dataset,
        config(iterations=6, evaluation_mode=ValueMode.REGULARIZED_POLICY, alpha=0.5, epsilon_trust=0.05),
        seed=1,
        mdp=mdp,
        callback=seen.append,
    )
    assert seen == result.reports
    for report in result.reports:
        assert report.regularized_return >= report.regularized_return_before - 1e-9
        assert report.trust_region_ok
        assert report.variance_ok
        assert report.n_synthetic == 32
        assert sum(report.posterior) == pytest.approx(1.0)


def test_improvement_condition_on_first_step(instance):
    mdp, dataset = instance
    result = pspo_train(
        dataset,
        config(iterations=1, evaluation_mode=ValueMode.REGULARIZED_POLICY, check_improvement=True),
        seed=2,
        mdp=mdp,
    )
    report = result.reports[0]
    assert report.condition_holds
    assert report.condition_lhs > report.condition_rhs
    assert report.monotonic
    assert result.condition_failures == 0
    assert result.monotonic_violations == 0


def test_converges_to_closed_form_with_true_model(instance):
    mdp, dataset = instance
    positive = mdp.copy(update={"reward": np.abs(mdp.reward)})
    ensemble = ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[true_model(positive)])
    reference = SoftPolicy.uniform(4, 3)
    result = pspo_train(
        dataset,
        config(iterations=300, alpha=0.1, epsilon_trust=0.05, ensemble_size=1, model_pool_size=1),
        seed=4,
        mdp=positive,
        reference=reference,
        ensemble=ensemble,
    )
    context = OperatorContext(ensemble=ensemble, belief=Belief.uniform(1), gamma=0.9, alpha=0.1, reference=reference)
    optimal = closed_form_optimal_policy(iterate_operator(OperatorTag.OPTIMALITY, context), reference, 0.1)
    expected = expected_return(positive, optimal)
    assert result.reports[-1].exact_return == pytest.approx(expected, rel=1e-2)


def test_average_utilization_keeps_uniform_belief(instance):
    mdp, dataset = instance
    result = pspo_train(dataset, config(iterations=3, average_utilization=True), seed=5, mdp=mdp)
    np.testing.assert_allclose(result.belief.posterior, result.belief.prior)
    assert {report.variant for report in result.reports} == {"average_utilization"}


def test_alpha_zero_ablation(instance):
    mdp, dataset = instance
    result = pspo_train(
        dataset,
        config(iterations=2, without_regularization=True, ablation_no_reg_mode=NoRegularizationMode.ALPHA_ZERO),
        seed=6,
        mdp=mdp,
    )
    assert result.reports[-1].variant == "without_regularization_alpha_zero"
    assert all(report.trust_region_ok for report in result.reports)


def test_uniform_reference_ablation(instance):
    mdp, dataset = instance
    result = pspo_train(dataset, config(iterations=0, without_regularization=True), seed=7, mdp=mdp)
    np.testing.assert_allclose(result.policy.probs, 1.0 / 3.0)


def test_uniform_reference_ablation_drops_reference_penalty(instance):
    mdp, dataset = instance
    result = pspo_train(dataset, config(iterations=1, without_regularization=True), seed=7, mdp=mdp)
    (report,) = result.reports
    assert report.variant == "without_regularization_uniform_mu"
    assert report.lambda_used > 0.0
    # шаг из равномерной политики: pi ∝ exp(Q / lambda) без слагаемого alpha
    np.testing.assert_allclose(result.policy.probs, softmax(result.q.values / report.lambda_used, axis=1), atol=1e-12)
    assert report.trust_region_ok


def test_stochastic_evaluation_reads_target_q(instance):
    mdp, dataset = instance
    ensemble = ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[true_model(mdp)])
    full_step = LearningRateSchedule(kind=ScheduleKind.CONSTANT, c=1.0)
    trainer = TabularTrainer(
        dataset,
        config(evaluation_solver=EvaluationSolver.STOCHASTIC, stochastic_steps=1, schedule=full_step),
        seed=0,
        mdp=mdp,
        ensemble=ensemble,
    )
    trainer.target_q = QFunction(values=np.full((4, 3), 2.0))
    context = OperatorContext(
        ensemble=ensemble,
        belief=trainer.belief,
        gamma=0.9,
        alpha=trainer.alpha,
        policy=trainer.policy,
        reference=trainer.reference,
    )
    queries = dataset.subset(np.arange(10))
    targets = trainer.evaluate(context, queries)

    states, actions = queries.state_indices(), queries.actions
    expected = sample_targets(trainer.target_q, states, actions, context, trainer.mode, mdp.r_max, 0)
    np.testing.assert_allclose(targets, expected)
    np.testing.assert_allclose(trainer.q.values[states, actions], expected)
    from_online = sample_targets(QFunction.zeros(4, 3), states, actions, context, trainer.mode, mdp.r_max, 0)
    assert not np.allclose(expected, from_online)


def test_failure_carries_iteration(instance):
    mdp, dataset = instance
    with pytest.raises(IterationError) as error:
        pspo_train(dataset, config(iterations=2), seed=8, mdp=mdp, initial_policy=SoftPolicy.uniform(4, 2))
    assert error.value.iteration == 0


def test_missing_inputs(instance):
    mdp, dataset = instance
    with pytest.raises(ConfigurationError):
        pspo_train(dataset, config(), seed=0)
    with pytest.raises(ValueError):
        pspo_train(dataset.subset(np.array([], dtype=np.int64)), config(), seed=0, mdp=mdp)
    with pytest.raises(ConfigurationError):
        pspo_train(linear_dataset(50, seed=0), config(), seed=0, features=AffineFeatures())


def test_continuous_training_smoke():
    features = AffineFeatures()
    reference = SoftPolicy(
        representation=Representation.LINEAR,
        theta=np.zeros(features.dim),
        reference_log_probs=np.log([0.5, 0.5]),
        feature_map_id=AFFINE_ID,
    )
    result = pspo_train(
        linear_dataset(400, seed=1),
        config(iterations=3, ensemble_size=2, model_pool_size=2, dynamics_epochs=50, batch_size=64),
        seed=9,
        features=features,
        reference=reference,
        r_max=3.0,
    )
    assert len(result.reports) == 3
    assert result.policy.representation == Representation.LINEAR
    assert result.policy.feature_map_id == AFFINE_ID
    assert len(result.uncertainty_samples) == 3 * 64
    for report in result.reports:
        assert report.trust_region_ok
        assert report.variance_ok
        assert report.exact_return is None
        assert report.uncertainty_td_spearman is None or -1.0 <= report.uncertainty_td_spearman <= 1.0
