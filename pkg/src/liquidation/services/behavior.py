"""
Поведенческая политика, собравшая набор данных: "держать" с вероятностью ``behavior_hold_prob``,
иначе равновероятная доля конвертации.
"""

import numpy as np

from liquidation.services.shemas import HOLD_ACTION, LiquidationConfig, LiquidationState
from mdp.services.features import FeatureMap
from mdp.services.shemas import Representation, SeedLike, SoftPolicy


def behavior_probabilities(config: LiquidationConfig) -> np.ndarray:
    """
    Аналитические вероятности действий поведенческой политики (не зависят от состояния).

    :param config: Конфигурация
    :return:
    """

    n_converts = config.n_actions - 1
    probs = np.full(config.n_actions, (1.0 - config.behavior_hold_prob) / n_converts)
    probs[HOLD_ACTION] = config.behavior_hold_prob

    return probs


def behavior_policy_action(config: LiquidationConfig, state: LiquidationState, rng_seed: SeedLike) -> int:
    """
    Выбор действия поведенческой политикой.

    :param config: Конфигурация
    :param state: Состояние (политика от него не зависит)
    :param rng_seed: Зерно или генератор
    :return:
    """

    del state
    rng = np.random.default_rng(rng_seed)
    if rng.random() < config.behavior_hold_prob:
        return HOLD_ACTION

    return int(rng.integers(1, config.n_actions))


def reference_policy(probs: np.ndarray, features: FeatureMap) -> SoftPolicy:
    """
    Линейная политика, равная заданному распределению действий во всех состояниях.

    :param probs: Вероятности действий
    :param features: Признаковое отображение
    :return:
    """

    with np.errstate(divide="ignore"):
        log_probs = np.log(probs)

    return SoftPolicy(
        representation=Representation.LINEAR,
        kappa=1.0,
        theta=np.zeros(features.dim),
        reference_log_probs=log_probs,
        feature_map_id=features.feature_map_id,
    )


def behavior_policy(config: LiquidationConfig, features: FeatureMap) -> SoftPolicy:
    """
    Поведенческая политика в линейном представлении (опорная политика ``mu``).

    :param config: Конфигурация
    :param features: Признаковое отображение
    :return:
    """

    return reference_policy(behavior_probabilities(config), features)
