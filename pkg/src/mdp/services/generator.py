"""
Генерация случайных конечных MDP и наборов данных поведенческой политики.
"""

import logging

import numpy as np

from base.exceptions import DimensionMismatchError
from mdp.services.shemas import OfflineDataset, SeedLike, SoftPolicy, StateKind, TabularMdp

logger = logging.getLogger()


def random_tabular_mdp(
    n_states: int,
    n_actions: int,
    gamma: float,
    seed: SeedLike,
    r_max: float = 1.0,
    concentration: float = 1.0,
) -> TabularMdp:
    """
    Случайный MDP: строки переходов и начальное распределение из распределения Дирихле,
    награды равномерно в ``[-r_max, r_max]``.

    :param n_states: Число состояний
    :param n_actions: Число действий
    :param gamma: Дисконт
    :param seed: Зерно генератора
    :param r_max: Граница наград
    :param concentration: Параметр концентрации Дирихле
    :return:
    """

    rng = np.random.default_rng(seed)
    transition = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    transition /= transition.sum(axis=-1, keepdims=True)
    reward = rng.uniform(-r_max, r_max, size=(n_states, n_actions))
    rho0 = rng.dirichlet(np.ones(n_states))
    rho0 /= rho0.sum()

    return TabularMdp(
        n_states=n_states,
        n_actions=n_actions,
        transition=transition,
        reward=reward,
        gamma=gamma,
        rho0=rho0,
        r_max=r_max,
    )


def generate_tabular_dataset(
    mdp: TabularMdp,
    behavior: SoftPolicy,
    n_records: int,
    episode_length: int,
    seed: SeedLike,
) -> OfflineDataset:
    """
    Набор данных поведенческой политики: эпизоды фиксированной длины из ``rho0``.

    Переходы непрерывной задачи, поэтому флаг ``done`` всегда ложен.

    :param mdp: MDP
    :param behavior: Поведенческая политика
    :param n_records: Число переходов
    :param episode_length: Длина эпизода
    :param seed: Зерно генератора
    :return:
    """

    if behavior.probs.shape != (mdp.n_states, mdp.n_actions):
        raise DimensionMismatchError("behavior policy does not match MDP dimensions")

    rng = np.random.default_rng(seed)
    states = np.empty(n_records, dtype=np.int64)
    actions = np.empty(n_records, dtype=np.int64)
    next_states = np.empty(n_records, dtype=np.int64)
    state = 0
    for index in range(n_records):
        if index % episode_length == 0:
            state = int(rng.choice(mdp.n_states, p=mdp.rho0))
        action = int(rng.choice(mdp.n_actions, p=behavior.probs[state]))
        next_state = int(rng.choice(mdp.n_states, p=mdp.transition[state, action]))
        states[index], actions[index], next_states[index] = state, action, next_state
        state = next_state

    logger.info("Generated tabular dataset: %s records.", n_records)

    return OfflineDataset(
        kind=StateKind.DISCRETE,
        states=states,
        actions=actions,
        rewards=mdp.reward[states, actions],
        next_states=next_states,
        dones=np.zeros(n_records, dtype=bool),
        synthetic=np.zeros(n_records, dtype=bool),
    )


def coverage_counts(dataset: OfflineDataset, n_states: int, n_actions: int) -> np.ndarray:
    """
    Число посещений каждой пары ``(s, a)``.

    :param dataset: Набор данных
    :param n_states: Число состояний
    :param n_actions: Число действий
    :return:
    """

    counts = np.zeros((n_states, n_actions))
    np.add.at(counts, (dataset.state_indices(), dataset.actions), 1.0)

    return counts


def behavior_frequencies(dataset: OfflineDataset, n_states: int, n_actions: int, smoothing: float) -> SoftPolicy:
    """
    Эмпирическая поведенческая политика со сглаживанием псевдосчётчиком.

    Для непосещённых состояний без сглаживания возвращается равномерная строка.

    :param dataset: Набор данных
    :param n_states: Число состояний
    :param n_actions: Число действий
    :param smoothing: Псевдосчётчик ``delta >= 0``
    :return:
    """

    counts = coverage_counts(dataset.real(), n_states, n_actions) + smoothing
    totals = counts.sum(axis=1, keepdims=True)
    probs = np.where(totals > 0.0, counts / np.where(totals > 0.0, totals, 1.0), 1.0 / n_actions)

    return SoftPolicy(probs=probs / probs.sum(axis=1, keepdims=True))
