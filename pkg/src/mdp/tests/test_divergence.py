import numpy as np
import pytest

from base.exceptions import InfiniteDivergenceError
from mdp.services.divergence import kl_divergence, soft_value, soft_value_rows
from mdp.services.shemas import QFunction, SoftPolicy


def test_soft_value_of_constant_row():
    q = QFunction(values=[[2.5, 2.5, 2.5]])
    reference = SoftPolicy(probs=[[0.2, 0.3, 0.5]])
    assert soft_value(q, reference, alpha=0.7, state=0) == pytest.approx(2.5, abs=1e-12)


def test_soft_value_known_value():
    q = QFunction(values=[[0.0, np.log(3.0)]])
    assert soft_value(q, SoftPolicy.uniform(1, 2), alpha=1.0, state=0) == pytest.approx(np.log(2.0), abs=1e-12)


def test_soft_value_shift_equivariance():
    rng = np.random.default_rng(4)
    rows = rng.normal(size=(50, 4))
    reference = rng.dirichlet(np.ones(4), size=50)
    shifted = soft_value_rows(rows + 3.25, reference, alpha=0.3)
    np.testing.assert_allclose(shifted, soft_value_rows(rows, reference, alpha=0.3) + 3.25, atol=1e-12)


def test_soft_value_is_non_expansion():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        q1, q2 = rng.normal(scale=5.0, size=(2, 6, 3))
        reference = rng.dirichlet(np.ones(3), size=6)
        alpha = float(rng.uniform(1e-2, 10.0))
        gap = np.abs(soft_value_rows(q1, reference, alpha) - soft_value_rows(q2, reference, alpha))
        assert np.all(gap <= np.max(np.abs(q1 - q2)) + 1e-12)


def test_soft_value_limits():
    rng = np.random.default_rng(12)
    rows = rng.uniform(-1.0, 1.0, size=(20, 5))
    reference = rng.dirichlet(np.full(5, 10.0), size=20)
    np.testing.assert_allclose(soft_value_rows(rows, reference, alpha=1e-3), rows.max(axis=1), atol=1e-2)
    np.testing.assert_allclose(soft_value_rows(rows, reference, alpha=1e3), (reference * rows).sum(axis=1), atol=1e-2)


def test_soft_value_ignores_actions_outside_reference_support():
    rows = np.array([[1.0, 100.0]])
    assert soft_value_rows(rows, np.array([1.0, 0.0]), alpha=1e-3)[0] == pytest.approx(1.0, abs=1e-9)


def test_soft_value_small_alpha_does_not_overflow():
    rows = np.array([[1000.0, -1000.0]])
    assert np.isfinite(soft_value_rows(rows, np.array([0.5, 0.5]), alpha=1e-3)).all()


def test_soft_value_rejects_non_positive_alpha():
    with pytest.raises(ValueError):
        soft_value_rows(np.zeros((1, 2)), np.array([0.5, 0.5]), alpha=0.0)


def test_kl_of_identical_rows_is_zero():
    policy = SoftPolicy(probs=[[0.1, 0.9], [0.6, 0.4]])
    assert kl_divergence(policy, policy, state=1) == 0.0


def test_kl_known_value():
    assert kl_divergence(SoftPolicy(probs=[[1.0, 0.0]]), SoftPolicy.uniform(1, 2), state=0) == pytest.approx(
        np.log(2.0), abs=1e-12
    )


def test_kl_support_violation():
    with pytest.raises(InfiniteDivergenceError):
        kl_divergence(SoftPolicy.uniform(1, 2), SoftPolicy(probs=[[1.0, 0.0]]), state=0)
