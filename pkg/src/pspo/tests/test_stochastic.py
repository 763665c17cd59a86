import numpy as np
import pytest

from belief.services.shemas import Belief
from dynamics.services.shemas import CategoricalModel, ModelEnsemble, ModelKind
from mdp.services.shemas import QFunction, SoftPolicy, ValueMode
from pspo.services.operators import OperatorContext, OperatorTag, exact_fixed_point, posterior_eval_operator
from pspo.services.shemas import LearningRateSchedule, ScheduleKind
from pspo.services.stochastic import sample_targets, stochastic_q_update, variance_bound_check
from pspo.tests.instances import random_policy, true_model, two_model_context

FULL_STEP = LearningRateSchedule(kind=ScheduleKind.CONSTANT, c=1.0)
NO_STEP = LearningRateSchedule(kind=ScheduleKind.CONSTANT, c=0.0)


def all_pairs(n_states, n_actions):
    states, actions = np.divmod(np.arange(n_states * n_actions), n_actions)
    return states, actions


def single_model_context(seed):
    mdp, context = two_model_context(3, 2, seed=seed)
    ensemble = ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[true_model(mdp)])

    return mdp, context.copy(update={"ensemble": ensemble, "belief": Belief.uniform(1)})


def test_full_step_jumps_to_target():
    mdp, context = single_model_context(seed=0)
    q = QFunction(values=np.random.default_rng(0).normal(size=(3, 2)))
    states, actions = all_pairs(3, 2)
    updated, summary = stochastic_q_update(
        q, states, actions, context, ValueMode.POLICY, 0, FULL_STEP, mdp.r_max, rng_seed=0
    )
    np.testing.assert_allclose(updated.values, posterior_eval_operator(q, context).values, atol=1e-12)
    assert summary.rate == 1.0
    assert summary.targets.shape == (6,)


def test_zero_step_keeps_q():
    mdp, context = two_model_context(3, 2, seed=1)
    q = QFunction(values=np.random.default_rng(1).normal(size=(3, 2)))
    states, actions = all_pairs(3, 2)
    updated, _ = stochastic_q_update(q, states, actions, context, ValueMode.OPTIMALITY, 5, NO_STEP, mdp.r_max, 1)
    np.testing.assert_array_equal(updated.values, q.values)


def test_repeated_query_gets_sequential_steps():
    mdp, context = single_model_context(seed=2)
    q = QFunction.zeros(3, 2)
    half = LearningRateSchedule(kind=ScheduleKind.CONSTANT, c=0.5)
    updated, summary = stochastic_q_update(
        q, np.array([1, 1]), np.array([0, 0]), context, ValueMode.POLICY, 0, half, mdp.r_max, 2
    )
    target = summary.targets[0]
    assert summary.targets[1] == target
    assert updated.values[1, 0] == pytest.approx(0.75 * target, abs=1e-15)


def test_targets_bounded_under_clamp():
    mdp, context = two_model_context(4, 2, seed=3)
    huge = QFunction(values=np.random.default_rng(3).uniform(-1e3, 1e3, size=(4, 2)))
    states, actions = all_pairs(4, 2)
    for mode in ValueMode:
        targets = sample_targets(huge, np.tile(states, 50), np.tile(actions, 50), context, mode, mdp.r_max, 3)
        assert np.max(np.abs(targets)) <= mdp.value_bound + 1e-12
        assert variance_bound_check(targets, mdp.r_max, mdp.gamma).passed


def test_variance_bound_value():
    assert variance_bound_check(np.array([0.0, 1.0]), r_max=1.0, gamma=0.9).bound == pytest.approx(100.0)


def test_constant_targets():
    check = variance_bound_check(np.full(10, 3.0), r_max=1.0, gamma=0.9)
    assert check.variance == 0.0
    assert check.passed


def test_two_point_extremal_targets():
    targets = np.tile([10.0, -10.0], 500)
    check = variance_bound_check(targets, r_max=1.0, gamma=0.9)
    assert check.variance == pytest.approx(check.bound, rel=1e-12)
    assert check.passed
    assert not variance_bound_check(np.array([-20.0, 20.0]), r_max=1.0, gamma=0.9).passed


def test_variance_needs_two_samples():
    with pytest.raises(ValueError):
        variance_bound_check(np.array([1.0]), r_max=1.0, gamma=0.9)


def frozen_two_state_context():
    first = CategoricalModel(
        counts=[[[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.1, 0.9]]],
        smoothing=0.0,
        reward_estimate=[[1.0, 0.0], [0.5, -0.5]],
    )
    second = CategoricalModel(
        counts=[[[0.6, 0.4], [0.4, 0.6]], [[0.7, 0.3], [0.3, 0.7]]],
        smoothing=0.0,
        reward_estimate=[[0.8, 0.2], [0.4, -0.3]],
    )
    context = OperatorContext(
        ensemble=ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[first, second]),
        belief=Belief.uniform(2).with_posterior(np.array([0.4, 0.6])),
        gamma=0.3,
        policy=SoftPolicy(probs=[[0.3, 0.7], [0.6, 0.4]]),
        reference=random_policy(2, 2, seed=0),
    )

    return context


def robbins_monro_error(seed, n_steps):
    context = frozen_two_state_context()
    schedule = LearningRateSchedule(kind=ScheduleKind.ROBBINS_MONRO, c=1.0, t0=1.0)
    rng = np.random.default_rng(seed)
    states, actions = all_pairs(2, 2)
    q = QFunction.zeros(2, 2)
    for step in range(n_steps):
        q, _ = stochastic_q_update(q, states, actions, context, ValueMode.POLICY, step, schedule, 1.0, rng)
    fixed_point = exact_fixed_point(OperatorTag.EVALUATION, context)

    return float(np.max(np.abs(q.values - fixed_point.values)))


def test_robbins_monro_converges():
    assert robbins_monro_error(seed=0, n_steps=20_000) < 2e-2


@pytest.mark.slow
def test_robbins_monro_converges_median():
    # 50 000 шагов по четырём парам: 200 000 обновлений
    errors = [robbins_monro_error(seed, n_steps=50_000) for seed in range(10)]
    assert np.median(errors) < 1e-2
