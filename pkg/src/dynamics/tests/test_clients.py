import numpy as np

from dynamics.clients.ensemble import EnsembleClient
from dynamics.services.fitting import draw_active, fit_ensemble
from dynamics.services.shemas import ModelKind
from dynamics.tests.affine import AffineFeatures, linear_dataset
from mdp.services.generator import generate_tabular_dataset, random_tabular_mdp
from mdp.services.shemas import SoftPolicy


def test_categorical_pool_round_trip(tmp_path):
    mdp = random_tabular_mdp(3, 2, gamma=0.9, seed=0)
    dataset = generate_tabular_dataset(mdp, SoftPolicy.uniform(3, 2), n_records=100, episode_length=10, seed=0)
    pool = fit_ensemble(dataset, ModelKind.CATEGORICAL, seeds=range(4), n_states=3, n_actions=2)
    ensemble = draw_active(pool, 2, rng_seed=1)
    client = EnsembleClient(tmp_path)
    client.save(ensemble)
    loaded = client.load()
    assert loaded.active_indices == ensemble.active_indices
    np.testing.assert_array_equal(loaded.transition_tensor(), ensemble.transition_tensor())
    np.testing.assert_array_equal(loaded.reward_tensor(), ensemble.reward_tensor())


def test_gaussian_round_trip(tmp_path):
    features = AffineFeatures(bound=3.0)
    members = fit_ensemble(linear_dataset(200, 1), ModelKind.GAUSSIAN, [5, 6], features=features, epochs=20)
    client = EnsembleClient(tmp_path)
    client.save(draw_active(members, 2, rng_seed=0, features=features))
    loaded = client.load()
    assert isinstance(loaded.feature_map, AffineFeatures)
    assert loaded.feature_map.bound == 3.0
    for first, second in zip(loaded.members, members):
        np.testing.assert_array_equal(first.mean_weights, second.mean_weights)
        np.testing.assert_array_equal(first.log_std, second.log_std)


def test_missing_file(tmp_path):
    assert EnsembleClient(tmp_path).load() is None
