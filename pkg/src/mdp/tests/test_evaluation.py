import numpy as np
import pytest

from base.exceptions import DimensionMismatchError, InfiniteDivergenceError
from mdp.services.evaluation import (
    bellman_residual,
    discounted_occupancy,
    exact_policy_eval,
    expected_return,
    regularized_return,
)
from mdp.services.generator import random_tabular_mdp
from mdp.services.shemas import SoftPolicy, TabularMdp


def random_policy(n_states: int, n_actions: int, seed: int) -> SoftPolicy:
    rng = np.random.default_rng(seed)
    return SoftPolicy(probs=rng.dirichlet(np.ones(n_actions), size=n_states))


def chain_mdp() -> TabularMdp:
    return TabularMdp(
        n_states=2,
        n_actions=1,
        transition=[[[0.0, 1.0]], [[0.0, 1.0]]],
        reward=[[0.0], [1.0]],
        gamma=0.9,
        rho0=[1.0, 0.0],
        r_max=1.0,
    )


def test_single_state_geometric_series():
    mdp = TabularMdp(
        n_states=1, n_actions=1, transition=[[[1.0]]], reward=[[1.0]], gamma=0.5, rho0=[1.0], r_max=1.0
    )
    q = exact_policy_eval(mdp, SoftPolicy.uniform(1, 1))
    np.testing.assert_allclose(q.values, [[2.0]], atol=1e-12)


def test_zero_reward_gives_zero_q():
    mdp = random_tabular_mdp(4, 3, gamma=0.8, seed=1)
    mdp = mdp.copy(update={"reward": np.zeros((4, 3))})
    q = exact_policy_eval(mdp, random_policy(4, 3, seed=2))
    np.testing.assert_array_equal(q.values, np.zeros((4, 3)))


def test_matches_truncated_power_iteration():
    mdp = random_tabular_mdp(5, 3, gamma=0.9, seed=7)
    policy = random_policy(5, 3, seed=7)
    q = np.zeros((5, 3))
    for _ in range(10_000):
        q = mdp.reward + mdp.gamma * mdp.transition @ np.einsum("sa,sa->s", policy.probs, q)
    np.testing.assert_allclose(exact_policy_eval(mdp, policy).values, q, atol=1e-8)


def test_bellman_residual_is_negligible():
    rng = np.random.default_rng(0)
    for seed in rng.integers(0, 2**31, size=1000):
        n_states, n_actions = int(seed % 5) + 1, int(seed % 3) + 1
        mdp = random_tabular_mdp(n_states, n_actions, gamma=0.95, seed=int(seed))
        policy = random_policy(n_states, n_actions, seed=int(seed))
        assert bellman_residual(mdp, policy, exact_policy_eval(mdp, policy)) < 1e-10


def test_dimension_mismatch():
    mdp = random_tabular_mdp(3, 2, gamma=0.5, seed=0)
    with pytest.raises(DimensionMismatchError):
        exact_policy_eval(mdp, SoftPolicy.uniform(3, 3))


def test_constant_reward_return():
    mdp = random_tabular_mdp(4, 2, gamma=0.75, seed=3)
    mdp = mdp.copy(update={"reward": np.full((4, 2), 0.5)})
    assert expected_return(mdp, random_policy(4, 2, seed=3)) == pytest.approx(0.5 / 0.25, abs=1e-12)


def test_deterministic_chain_return():
    assert expected_return(chain_mdp(), SoftPolicy.uniform(2, 1)) == pytest.approx(9.0, abs=1e-12)


def test_return_equals_occupancy_weighted_reward():
    mdp = random_tabular_mdp(6, 3, gamma=0.9, seed=11)
    policy = random_policy(6, 3, seed=11)
    occupancy = discounted_occupancy(mdp, policy)
    policy_reward = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    assert occupancy.sum() == pytest.approx(1.0, abs=1e-12)
    assert expected_return(mdp, policy) == pytest.approx(occupancy @ policy_reward / (1 - mdp.gamma), abs=1e-10)


def test_regularized_return_of_reference_is_plain_return():
    mdp = random_tabular_mdp(4, 3, gamma=0.9, seed=5)
    policy = random_policy(4, 3, seed=5)
    assert regularized_return(mdp, policy, policy, alpha=3.0) == pytest.approx(expected_return(mdp, policy), abs=1e-12)
    reference = random_policy(4, 3, seed=6)
    assert regularized_return(mdp, policy, reference, alpha=0.0) == pytest.approx(
        expected_return(mdp, policy), abs=1e-12
    )


def test_regularized_return_single_state():
    mdp = TabularMdp(
        n_states=1,
        n_actions=2,
        transition=[[[1.0], [1.0]]],
        reward=[[0.0, 0.0]],
        gamma=0.5,
        rho0=[1.0],
        r_max=1.0,
    )
    policy = SoftPolicy(probs=[[0.75, 0.25]])
    reference = SoftPolicy(probs=[[0.5, 0.5]])
    kl = 0.75 * np.log(0.75 / 0.5) + 0.25 * np.log(0.25 / 0.5)
    assert regularized_return(mdp, policy, reference, alpha=1.0) == pytest.approx(-2.0 * kl, abs=1e-12)


def test_regularized_return_non_increasing_in_alpha():
    for seed in range(100):
        mdp = random_tabular_mdp(3, 3, gamma=0.8, seed=seed)
        policy = random_policy(3, 3, seed=seed)
        reference = random_policy(3, 3, seed=seed + 1000)
        values = [regularized_return(mdp, policy, reference, alpha) for alpha in (0.1, 1.0, 10.0)]
        assert values[0] >= values[1] >= values[2]
        assert values[0] <= expected_return(mdp, policy) + 1e-12


def test_regularized_return_support_violation():
    mdp = random_tabular_mdp(2, 2, gamma=0.5, seed=0)
    with pytest.raises(InfiniteDivergenceError):
        regularized_return(mdp, SoftPolicy.uniform(2, 2), SoftPolicy(probs=[[1.0, 0.0], [0.5, 0.5]]), alpha=1.0)


def test_support_violation_without_regularization():
    mdp = random_tabular_mdp(2, 2, gamma=0.5, seed=0)
    policy = SoftPolicy.uniform(2, 2)
    reference = SoftPolicy(probs=[[1.0, 0.0], [0.5, 0.5]])
    assert regularized_return(mdp, policy, reference, alpha=0.0) == pytest.approx(expected_return(mdp, policy))
