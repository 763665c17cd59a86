"""
Небольшие табличные задачи для тестов алгоритма.
"""

from typing import Sequence

import numpy as np

from belief.services.shemas import Belief
from dynamics.services.shemas import CategoricalModel, ModelEnsemble, ModelKind
from mdp.services.generator import random_tabular_mdp
from mdp.services.shemas import SoftPolicy, TabularMdp
from pspo.services.operators import OperatorContext


def true_model(mdp: TabularMdp) -> CategoricalModel:
    return CategoricalModel(counts=mdp.transition, smoothing=0.0, reward_estimate=mdp.reward)


def perturbed_model(mdp: TabularMdp, seed: int, scale: float = 0.3) -> CategoricalModel:
    """
    Модель, смещённая от истинной: переходы смешаны со случайными строками, награды зашумлены.
    """

    rng = np.random.default_rng(seed)
    noise = rng.dirichlet(np.ones(mdp.n_states), size=(mdp.n_states, mdp.n_actions))
    reward = np.clip(mdp.reward + 0.1 * rng.standard_normal(mdp.reward.shape), -mdp.r_max, mdp.r_max)

    return CategoricalModel(
        counts=(1.0 - scale) * mdp.transition + scale * noise, smoothing=0.0, reward_estimate=reward
    )


def random_policy(n_states: int, n_actions: int, seed: int) -> SoftPolicy:
    return SoftPolicy(probs=np.random.default_rng(seed).dirichlet(np.full(n_actions, 3.0), size=n_states))


def two_model_context(
    n_states: int,
    n_actions: int,
    seed: int,
    gamma: float = 0.9,
    alpha: float = 0.5,
    weights: Sequence[float] = (0.3, 0.7),
) -> tuple[TabularMdp, OperatorContext]:
    """
    Истинная и смещённая модели с фиксированными апостериорными весами, случайные политика и опорная политика.
    """

    mdp = random_tabular_mdp(n_states, n_actions, gamma=gamma, seed=seed)
    ensemble = ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[true_model(mdp), perturbed_model(mdp, seed + 1)])
    context = OperatorContext(
        ensemble=ensemble,
        belief=Belief.uniform(2).with_posterior(np.array(weights, dtype=np.float64)),
        gamma=gamma,
        alpha=alpha,
        policy=random_policy(n_states, n_actions, seed + 2),
        reference=random_policy(n_states, n_actions, seed + 3),
    )

    return mdp, context
