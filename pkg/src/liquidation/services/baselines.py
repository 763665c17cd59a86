"""
Базовые стратегии ликвидации и правило выбора действий для обученной политики.
"""

import logging
from typing import Sequence

import numpy as np

from liquidation.services.environment import ActionRule, rollout_policy
from liquidation.services.shemas import HOLD_ACTION, LiquidationConfig
from mdp.services.features import FeatureMap
from mdp.services.policy import action_probabilities, sample_categorical_rows
from mdp.services.shemas import SeedLike, SoftPolicy

logger = logging.getLogger()

# сетка порогов курса для настройки пороговой стратегии
DEFAULT_THRESHOLDS = tuple(np.round(np.arange(1.0, 2.01, 0.05), 2))
INVENTORY_EPSILON = 1e-12


class ImmediatePolicy:
    """
    Конвертация всего объёма на первом шаге.
    """

    def __init__(self, config: LiquidationConfig) -> None:
        self.full_action = config.n_actions - 1

    def __call__(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:  # pylint: disable=unused-argument
        return np.full(states.shape[0], self.full_action)


class UniformTwapPolicy:
    """
    Равномерное исполнение: за шаг продаётся ``1 / T`` начального объёма. Доля остатка, которая
    возвращает инвентарь на равномерный график, округляется до ближайшей доли сетки.
    """

    def __init__(self, config: LiquidationConfig) -> None:
        self.horizon = config.horizon
        self.initial_inventory = config.initial_inventory
        self.fractions = config.fractions

    def __call__(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:  # pylint: disable=unused-argument
        inventory = states[:, 1]
        steps_left = np.maximum(self.horizon - states[:, 0], 1.0)
        # остаток по графику после текущего шага
        scheduled = self.initial_inventory * (steps_left - 1.0) / self.horizon
        target = np.clip((inventory - scheduled) / np.maximum(inventory, INVENTORY_EPSILON), 0.0, 1.0)

        return np.argmin(np.abs(self.fractions[None, :] - target[:, None]), axis=1)


class ThresholdPolicy:
    """
    Конвертация всего объёма, когда курс не ниже порога, или на последнем шаге.
    """

    def __init__(self, config: LiquidationConfig, threshold: float) -> None:
        self.horizon = config.horizon
        self.full_action = config.n_actions - 1
        self.threshold = threshold

    def __call__(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:  # pylint: disable=unused-argument
        convert = (states[:, 2] >= self.threshold) | (states[:, 0] >= self.horizon - 1)

        return np.where(convert, self.full_action, HOLD_ACTION)


class SoftPolicyRule:
    """
    Выборка действий из стохастической политики.
    """

    def __init__(self, policy: SoftPolicy, features: FeatureMap) -> None:
        self.policy = policy
        self.features = features

    def __call__(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return sample_categorical_rows(action_probabilities(self.policy, states, features=self.features), rng)


def tune_threshold(
    config: LiquidationConfig,
    n_episodes: int,
    rng_seed: SeedLike,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> float:
    """
    Подбор порога по средней награде на свежих симуляциях (общие случайные числа для всех порогов).

    :param config: Конфигурация
    :param n_episodes: Число эпизодов на порог
    :param rng_seed: Зерно
    :param thresholds: Кандидаты
    :return:
    """

    seed = int(np.random.default_rng(rng_seed).integers(2**32))
    means = [rollout_policy(config, ThresholdPolicy(config, value), n_episodes, seed).mean() for value in thresholds]
    best = float(thresholds[int(np.argmax(means))])
    logger.info("Tuned threshold %.9g (mean return %.9g).", best, max(means))

    return best


def baseline_policies(
    config: LiquidationConfig,
    rng_seed: SeedLike = 0,
    tuning_episodes: int = 500,
) -> dict[str, ActionRule]:
    """
    Базовые стратегии: немедленная ликвидация, равномерное исполнение и настроенная пороговая.

    :param config: Конфигурация
    :param rng_seed: Зерно настройки порога
    :param tuning_episodes: Число эпизодов на кандидата порога
    :return:
    """

    return {
        "immediate": ImmediatePolicy(config),
        "uniform_twap": UniformTwapPolicy(config),
        "oracle_threshold": ThresholdPolicy(config, tune_threshold(config, tuning_episodes, rng_seed)),
    }
