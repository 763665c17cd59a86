import numpy as np
import pytest

from liquidation.services.ou import ou_path, ou_step
from liquidation.services.shemas import OuParams


def test_deterministic_fixed_point():
    params = OuParams(sigma=0.0)
    assert ou_step(params, params.mu_rate, rng_seed=0) == params.mu_rate


def test_deterministic_step():
    params = OuParams(sigma=0.0, theta=0.05, mu_rate=1.5, dt=1.0)
    assert ou_step(params, 1.0, rng_seed=0) == pytest.approx(1.5 - 0.5 * np.exp(-0.05), abs=1e-15)
    assert ou_step(params, 1.0, rng_seed=0) == pytest.approx(1.024385, abs=1e-6)


def test_step_is_seeded_and_non_negative():
    params = OuParams(sigma=5.0)
    assert ou_step(params, 0.1, rng_seed=3) == ou_step(params, 0.1, rng_seed=3)
    assert min(ou_step(params, 0.0, rng_seed=seed) for seed in range(50)) == 0.0


def test_negative_rate_is_rejected():
    with pytest.raises(ValueError):
        ou_step(OuParams(), -0.1, rng_seed=0)


def test_path_matches_steps_without_noise():
    params = OuParams(sigma=0.0)
    path = ou_path(params, 1.0, n_steps=100, rng_seed=0)
    expected = params.mu_rate + (1.0 - params.mu_rate) * np.exp(-params.theta * np.arange(101))
    np.testing.assert_allclose(path, expected, rtol=1e-12)


@pytest.mark.slow
def test_stationary_moments():
    params = OuParams(theta=0.05, mu_rate=1.5, sigma=0.2, dt=1.0)
    path = ou_path(params, params.mu_rate, n_steps=4_000_000, rng_seed=11)
    assert abs(path.mean() - 1.5) < 0.01
    assert abs(path.var() / params.stationary_variance - 1.0) < 0.05
    assert params.stationary_variance == pytest.approx(0.4)
