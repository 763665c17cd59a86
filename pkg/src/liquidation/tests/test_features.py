import numpy as np

from liquidation.services.features import STATE_FEATURES, LiquidationFeatures
from liquidation.services.shemas import LiquidationConfig
from mdp.services.features import build_feature_map

FEATURES = LiquidationFeatures.from_config(LiquidationConfig())
# компоненты phi(s), не зависящие от курса: 1, tau, x, tau*x
RATE_FREE = [0, 1, 2, 4]


def test_dimensions():
    states = np.array([[10.0, 50.0, 1.2], [99.0, 1.0, 0.3]])
    assert FEATURES.dim == 2 * STATE_FEATURES == 46
    assert FEATURES.state_action(states, np.array([0, 3])).shape == (2, 46)
    assert FEATURES.all_actions(states).shape == (2, 11, 46)


def test_deterministic_and_finite_at_origin():
    state = np.array([[0.0, 0.0, 0.0]])
    first = FEATURES.state_features(state)
    np.testing.assert_array_equal(first, FEATURES.state_features(state.copy()))
    assert np.all(np.isfinite(first))


def test_rate_changes_only_rate_coordinates():
    first = FEATURES.state_features(np.array([[40.0, 60.0, 1.0]]))[0]
    second = FEATURES.state_features(np.array([[40.0, 60.0, 2.0]]))[0]
    changed = np.flatnonzero(first != second)
    assert not set(changed) & set(RATE_FREE)
    assert {3, 5, 6} <= set(changed)


def test_action_blocks():
    states = np.array([[5.0, 80.0, 1.4]])
    phi = FEATURES.state_features(states)[0]
    every = FEATURES.all_actions(states)[0]
    np.testing.assert_array_equal(every[0], np.concatenate([phi, np.zeros_like(phi)]))
    np.testing.assert_array_equal(every[-1], np.concatenate([np.zeros_like(phi), phi]))
    np.testing.assert_allclose(every[5], 0.5 * np.concatenate([phi, phi]))


def test_out_of_box_states_are_clipped():
    features = LiquidationFeatures.from_config(LiquidationConfig())
    inside = features.state_features(np.array([[100.0, 100.0, 3.0]]))
    outside = features.state_features(np.array([[120.0, 100.0, 7.0]]))
    np.testing.assert_array_equal(inside, outside)
    assert features.clip_count == 1


def test_terminal_states():
    states = np.array([[99.6, 50.0, 1.0], [10.0, 0.001, 1.0], [10.0, 50.0, 1.0]])
    np.testing.assert_array_equal(FEATURES.is_terminal(states), [True, True, False])


def test_registry_round_trip():
    rebuilt = build_feature_map(FEATURES.to_document())
    states = np.array([[3.0, 30.0, 1.1]])
    np.testing.assert_array_equal(rebuilt.all_actions(states), FEATURES.all_actions(states))
