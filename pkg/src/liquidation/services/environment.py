"""
Окружение оптимальной ликвидации: динамика остатка и курса, наборы данных поведенческой политики
и оценка политик методом Монте-Карло.
"""

import logging
from typing import Optional, Protocol

import numpy as np

from base.exceptions import EnvironmentDoneError
from liquidation.services.behavior import behavior_probabilities
from liquidation.services.ou import ou_transition
from liquidation.services.shemas import LiquidationConfig, LiquidationState, TerminalRule
from mdp.services.policy import sample_categorical_rows
from mdp.services.shemas import OfflineDataset, SeedLike, StateKind

logger = logging.getLogger()


class ActionRule(Protocol):
    """
    Правило выбора действий для пакета состояний ``(n, 3)``.
    """

    def __call__(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        ...


def transition_batch(
    config: LiquidationConfig,
    states: np.ndarray,
    actions: np.ndarray,
    normal: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Векторизованный шаг окружения.

    :param config: Конфигурация
    :param states: Состояния ``(n, 3)`` со столбцами ``t, m, p``
    :param actions: Индексы действий ``(n,)``
    :param normal: Стандартные нормальные величины для курса ``(n,)``
    :return: Следующие состояния, награды, признаки завершения
    """

    t, inventory, rate = states[:, 0], states[:, 1], states[:, 2]
    fractions = config.fractions[np.asarray(actions, dtype=np.int64)]
    converted = fractions * inventory
    rewards = converted * rate
    next_inventory = inventory - converted
    next_t = t + 1.0
    at_horizon = next_t >= config.horizon
    if config.terminal_rule == TerminalRule.FORCE_LIQUIDATE:
        rewards = rewards + np.where(at_horizon, next_inventory * rate, 0.0)
        next_inventory = np.where(at_horizon, 0.0, next_inventory)
    next_states = np.column_stack([next_t, next_inventory, ou_transition(config.ou, rate, normal)])

    return next_states, rewards, at_horizon | (next_inventory <= 0.0)


def initial_states(config: LiquidationConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Начальные состояния ``(0, M, p0)``, ``p0 ~ N(p0_mean, p0_std^2)`` с ограничением снизу нулём.

    :param config: Конфигурация
    :param size: Число состояний
    :param rng: Генератор
    :return:
    """

    rates = np.maximum(config.ou.p0_mean + config.ou.p0_std * rng.standard_normal(size), 0.0)

    return np.column_stack([np.zeros(size), np.full(size, config.initial_inventory), rates])


def env_step(
    config: LiquidationConfig,
    state: LiquidationState,
    action: int,
    rng_seed: SeedLike,
) -> tuple[LiquidationState, float, bool]:
    """
    Один шаг окружения.

    :param config: Конфигурация
    :param state: Текущее состояние
    :param action: Индекс действия
    :param rng_seed: Зерно или генератор
    :return: Следующее состояние, награда, признак завершения
    """

    if state.t >= config.horizon or state.inventory <= 0.0:
        raise EnvironmentDoneError(f"episode is over at t={state.t}, inventory={state.inventory}")
    if not 0 <= action < config.n_actions:
        raise ValueError(f"action {action} is outside the action grid")

    normal = np.random.default_rng(rng_seed).standard_normal(1)
    next_states, rewards, dones = transition_batch(config, state.as_array()[None, :], np.array([action]), normal)

    return LiquidationState.from_array(next_states[0]), float(rewards[0]), bool(dones[0])


class LiquidationEnvironment:
    """
    Экземпляр окружения с собственным состоянием и генератором случайных чисел.
    """

    def __init__(self, config: LiquidationConfig, rng_seed: SeedLike = None) -> None:
        """
        Конструктор.

        :param config: Конфигурация
        :param rng_seed: Зерно или генератор
        """

        self.config = config
        self.rng = np.random.default_rng(rng_seed)
        self.state: Optional[LiquidationState] = None
        self.done = True

    def reset(self) -> LiquidationState:
        """
        Начало нового эпизода.

        :return:
        """

        self.state = LiquidationState.from_array(initial_states(self.config, 1, self.rng)[0])
        self.done = False

        return self.state

    def step(self, action: int) -> tuple[LiquidationState, float, bool]:
        """
        Шаг эпизода.

        :param action: Индекс действия
        :return:
        """

        if self.done or self.state is None:
            raise EnvironmentDoneError("call reset() before stepping a finished episode")
        self.state, reward, self.done = env_step(self.config, self.state, action, self.rng)

        return self.state, reward, self.done


def run_episodes(
    config: LiquidationConfig,
    rule: ActionRule,
    n_episodes: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """
    Параллельное проигрывание эпизодов; переходы упорядочены по эпизодам, внутри эпизода – по времени.

    :param config: Конфигурация
    :param rule: Правило выбора действий
    :param n_episodes: Число эпизодов
    :param rng: Генератор
    :return: Столбцы ``episodes, states, actions, rewards, next_states, dones``
    """

    states = initial_states(config, n_episodes, rng)
    alive = np.ones(n_episodes, dtype=bool)
    steps: dict[str, list[np.ndarray]] = {
        "episodes": [],
        "states": [],
        "actions": [],
        "rewards": [],
        "next_states": [],
        "dones": [],
    }
    for _ in range(config.horizon):
        episodes = np.flatnonzero(alive)
        if episodes.size == 0:
            break
        current = states[episodes]
        actions = rule(current, rng)
        next_states, rewards, dones = transition_batch(config, current, actions, rng.standard_normal(episodes.size))
        for name, column in zip(steps, (episodes, current, actions, rewards, next_states, dones)):
            steps[name].append(column)
        states[episodes] = next_states
        alive[episodes] = ~dones

    columns = {name: np.concatenate(values) for name, values in steps.items()}
    order = np.argsort(columns["episodes"], kind="stable")

    return {name: column[order] for name, column in columns.items()}


def behavior_rule(config: LiquidationConfig) -> ActionRule:
    """
    Поведенческая политика как правило выбора действий.

    :param config: Конфигурация
    :return:
    """

    probs = behavior_probabilities(config)

    def rule(states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return sample_categorical_rows(np.broadcast_to(probs, (states.shape[0], probs.shape[0])), rng)

    return rule


def generate_liquidation_dataset(config: LiquidationConfig, n_episodes: int, rng_seed: SeedLike) -> OfflineDataset:
    """
    Набор переходов поведенческой политики; границы эпизодов отмечены флагом ``done``.

    :param config: Конфигурация
    :param n_episodes: Число эпизодов
    :param rng_seed: Зерно или генератор
    :return:
    """

    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")

    columns = run_episodes(config, behavior_rule(config), n_episodes, np.random.default_rng(rng_seed))
    size = columns["actions"].shape[0]
    logger.info("Generated liquidation dataset: %s episodes, %s records.", n_episodes, size)

    return OfflineDataset(
        kind=StateKind.CONTINUOUS,
        states=columns["states"],
        actions=columns["actions"],
        rewards=columns["rewards"],
        next_states=columns["next_states"],
        dones=columns["dones"],
        synthetic=np.zeros(size, dtype=bool),
    )


def rollout_policy(config: LiquidationConfig, rule: ActionRule, n_episodes: int, rng_seed: SeedLike) -> np.ndarray:
    """
    Недисконтированные суммарные награды эпизодов в истинном окружении.

    :param config: Конфигурация
    :param rule: Правило выбора действий
    :param n_episodes: Число эпизодов
    :param rng_seed: Зерно или генератор
    :return: Вектор длины ``n_episodes``
    """

    columns = run_episodes(config, rule, n_episodes, np.random.default_rng(rng_seed))

    return np.bincount(columns["episodes"], weights=columns["rewards"], minlength=n_episodes)
