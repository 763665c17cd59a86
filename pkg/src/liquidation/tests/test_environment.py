import numpy as np
import pytest

from base.exceptions import EnvironmentDoneError
from liquidation.services.environment import (
    LiquidationEnvironment,
    env_step,
    generate_liquidation_dataset,
)
from liquidation.services.shemas import HOLD_ACTION, LiquidationConfig, LiquidationState, OuParams, TerminalRule

FULL = 10
HALF = 5


def test_hold_keeps_inventory():
    config = LiquidationConfig()
    state = LiquidationState(t=0, inventory=100.0, rate=1.0)
    next_state, reward, done = env_step(config, state, HOLD_ACTION, rng_seed=0)
    assert reward == 0.0
    assert next_state.inventory == 100.0
    assert next_state.t == 1
    assert not done


def test_full_conversion_ends_episode():
    config = LiquidationConfig()
    state = LiquidationState(t=3, inventory=100.0, rate=1.2)
    next_state, reward, done = env_step(config, state, FULL, rng_seed=0)
    assert reward == pytest.approx(120.0, abs=1e-12)
    assert next_state.inventory == 0.0
    assert done


def test_two_half_conversions():
    config = LiquidationConfig()
    state = LiquidationState(t=0, inventory=100.0, rate=1.0)
    first_rate = state.rate
    state, first_reward, _ = env_step(config, state, HALF, rng_seed=1)
    second_rate = state.rate
    state, second_reward, _ = env_step(config, state, HALF, rng_seed=2)
    assert first_reward == pytest.approx(50.0 * first_rate, abs=1e-12)
    assert second_reward == pytest.approx(25.0 * second_rate, abs=1e-12)
    assert state.inventory == pytest.approx(25.0)


def test_step_after_horizon_fails():
    config = LiquidationConfig(horizon=5)
    with pytest.raises(EnvironmentDoneError):
        env_step(config, LiquidationState(t=5, inventory=10.0, rate=1.0), HOLD_ACTION, rng_seed=0)
    with pytest.raises(EnvironmentDoneError):
        env_step(config, LiquidationState(t=1, inventory=0.0, rate=1.0), HOLD_ACTION, rng_seed=0)


def test_environment_episode():
    environment = LiquidationEnvironment(LiquidationConfig(horizon=3), rng_seed=4)
    with pytest.raises(EnvironmentDoneError):
        environment.step(HOLD_ACTION)
    environment.reset()
    dones = [environment.step(HOLD_ACTION)[2] for _ in range(3)]
    assert dones == [False, False, True]
    with pytest.raises(EnvironmentDoneError):
        environment.step(HOLD_ACTION)


def test_force_liquidate_converts_everything():
    config = LiquidationConfig(horizon=2, terminal_rule=TerminalRule.FORCE_LIQUIDATE)
    state = LiquidationState(t=1, inventory=40.0, rate=2.0)
    next_state, reward, done = env_step(config, state, HOLD_ACTION, rng_seed=0)
    assert reward == pytest.approx(80.0)
    assert next_state.inventory == 0.0
    assert done


def test_single_episode_dataset():
    config = LiquidationConfig(horizon=20)
    dataset = generate_liquidation_dataset(config, n_episodes=1, rng_seed=0)
    assert 1 <= len(dataset) <= 20
    assert dataset.dones[-1]
    assert not dataset.dones[:-1].any()
    assert not dataset.synthetic.any()


def test_always_hold_dataset_earns_nothing():
    config = LiquidationConfig(horizon=10, behavior_hold_prob=1.0)
    dataset = generate_liquidation_dataset(config, n_episodes=5, rng_seed=0)
    assert len(dataset) == 50
    assert np.all(dataset.rewards == 0.0)
    assert np.all(dataset.actions == HOLD_ACTION)


def test_dataset_is_seeded():
    config = LiquidationConfig(horizon=10)
    first = generate_liquidation_dataset(config, n_episodes=3, rng_seed=8)
    second = generate_liquidation_dataset(config, n_episodes=3, rng_seed=8)
    np.testing.assert_array_equal(first.states, second.states)
    np.testing.assert_array_equal(first.actions, second.actions)


def test_dataset_requires_episodes():
    with pytest.raises(ValueError):
        generate_liquidation_dataset(LiquidationConfig(), n_episodes=0, rng_seed=0)


@pytest.mark.parametrize("terminal_rule", list(TerminalRule))
def test_conservation_and_reward_identity(terminal_rule):
    config = LiquidationConfig(horizon=30, terminal_rule=terminal_rule, ou=OuParams(sigma=0.5))
    dataset = generate_liquidation_dataset(config, n_episodes=200, rng_seed=5)
    converted = dataset.states[:, 1] - dataset.next_states[:, 1]
    np.testing.assert_allclose(dataset.rewards, converted * dataset.states[:, 2], atol=1e-12)
    final_inventory = dataset.next_states[dataset.dones, 1]
    episode_converted = np.add.reduceat(converted, np.flatnonzero(np.r_[True, dataset.dones[:-1]]))
    np.testing.assert_allclose(episode_converted, config.initial_inventory - final_inventory, atol=1e-9)
    if terminal_rule == TerminalRule.FORCE_LIQUIDATE:
        np.testing.assert_allclose(episode_converted, config.initial_inventory, atol=1e-9)


def test_dataset_action_marginal():
    config = LiquidationConfig()
    dataset = generate_liquidation_dataset(config, n_episodes=1000, rng_seed=1)
    assert abs(np.mean(dataset.actions == HOLD_ACTION) - 0.8) < 0.01
