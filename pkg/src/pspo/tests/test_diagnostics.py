import numpy as np
import pytest

from mdp.services.generator import random_tabular_mdp
from mdp.services.shemas import QFunction, SoftPolicy
from pspo.services.diagnostics import (
    contraction_check,
    finite_difference_gradients,
    fisher_matrix,
    improvement_condition_check,
)
from pspo.services.operators import OperatorTag
from pspo.tests.instances import random_policy, two_model_context

TAGS = [OperatorTag.EVALUATION, OperatorTag.OPTIMALITY, OperatorTag.REGULARIZED_EVALUATION]


@pytest.mark.parametrize("tag", TAGS)
def test_equal_inputs(tag):
    _, context = two_model_context(3, 2, seed=0)
    q = QFunction(values=np.random.default_rng(0).normal(size=(3, 2)))
    check = contraction_check(tag, q, q, context)
    assert check.lhs == 0.0
    assert check.passed


@pytest.mark.parametrize("tag", TAGS)
def test_constant_shift(tag):
    _, context = two_model_context(4, 3, seed=1, gamma=0.8)
    q = QFunction(values=np.random.default_rng(1).normal(size=(4, 3)))
    shifted = QFunction(values=q.values + 2.5)
    check = contraction_check(tag, q, shifted, context)
    assert check.lhs == pytest.approx(0.8 * 2.5, rel=1e-10)
    assert check.rhs == pytest.approx(0.8 * 2.5, rel=1e-12)
    assert check.passed


def _sweep(n_instances, n_pairs):
    for instance in range(n_instances):
        mdp, context = two_model_context(3 + instance % 3, 2 + instance % 2, seed=100 + instance)
        rng = np.random.default_rng(instance)
        shape = (mdp.n_states, mdp.n_actions)
        for _ in range(n_pairs):
            scale = mdp.value_bound * rng.uniform(0.01, 1.0)
            q1 = QFunction(values=rng.uniform(-scale, scale, size=shape))
            q2 = QFunction(values=rng.uniform(-scale, scale, size=shape))
            for tag in (OperatorTag.EVALUATION, OperatorTag.OPTIMALITY):
                assert contraction_check(tag, q1, q2, context).passed


def test_contraction_sweep():
    _sweep(n_instances=2, n_pairs=100)


@pytest.mark.slow
def test_contraction_sweep_full():
    _sweep(n_instances=20, n_pairs=1000)


def test_condition_at_reference():
    mdp = random_tabular_mdp(3, 2, gamma=0.9, seed=2)
    policy = random_policy(3, 2, seed=2)
    condition = improvement_condition_check(mdp, policy, policy, alpha=0.7, fd_step=1e-4)
    # у KL(pi || mu) нулевой градиент в точке pi = mu
    assert abs(condition.rhs) <= 1e-4 * condition.lhs
    assert condition.lhs > 0.0
    assert condition.holds
    assert condition.rank == condition.expected_rank == 3
    assert condition.warning is None


def test_condition_zero_reward():
    mdp = random_tabular_mdp(3, 2, gamma=0.9, seed=3)
    flat = mdp.copy(update={"reward": np.zeros((3, 2))})
    condition = improvement_condition_check(
        flat, random_policy(3, 2, seed=3), random_policy(3, 2, seed=4), alpha=1.0, fd_step=1e-4
    )
    assert condition.lhs == 0.0
    assert not condition.holds


def test_gradients_match_richardson():
    mdp = random_tabular_mdp(3, 2, gamma=0.9, seed=9)
    policy, reference = random_policy(3, 2, seed=9), random_policy(3, 2, seed=10)
    gradient_j, gradient_c = finite_difference_gradients(mdp, policy, reference, 0.5, 1e-4)
    coarse_j, coarse_c = finite_difference_gradients(mdp, policy, reference, 0.5, 1e-3)
    fine_j, fine_c = finite_difference_gradients(mdp, policy, reference, 0.5, 5e-4)
    for gradient, coarse, fine in ((gradient_j, coarse_j, fine_j), (gradient_c, coarse_c, fine_c)):
        oracle = (4.0 * fine - coarse) / 3.0
        assert np.linalg.norm(gradient - oracle) <= 1e-5 * np.linalg.norm(oracle)


def test_fisher_blocks():
    mdp = random_tabular_mdp(2, 3, gamma=0.5, seed=11)
    policy = random_policy(2, 3, seed=11)
    fisher = fisher_matrix(mdp, policy)
    assert fisher.shape == (6, 6)
    np.testing.assert_allclose(fisher, fisher.T)
    np.testing.assert_allclose(fisher[:3, 3:], 0.0)
    # логиты определены с точностью до сдвига: единичный вектор блока в ядре
    np.testing.assert_allclose(fisher[:3, :3] @ np.ones(3), 0.0, atol=1e-15)


def test_condition_arguments():
    mdp = random_tabular_mdp(2, 2, gamma=0.9, seed=12)
    policy = random_policy(2, 2, seed=12)
    with pytest.raises(ValueError):
        improvement_condition_check(mdp, policy, policy, alpha=1.0, fd_step=1e-2)
    degenerate = SoftPolicy(probs=[[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ValueError):
        improvement_condition_check(mdp, degenerate, policy, alpha=1.0, fd_step=1e-4)
