"""
Вычисление распределений действий и значений Q для табличных и линейных представлений.
"""

from typing import Optional

import numpy as np
from scipy.special import softmax

from base.exceptions import DimensionMismatchError
from mdp.services.features import FeatureMap
from mdp.services.shemas import QFunction, Representation, SoftPolicy


def _require_features(features: Optional[FeatureMap], feature_map_id: Optional[str]) -> FeatureMap:
    if features is None:
        raise DimensionMismatchError("linear representation requires a feature map")
    if feature_map_id is not None and feature_map_id != features.feature_map_id:
        raise DimensionMismatchError(f"feature map {features.feature_map_id!r} does not match {feature_map_id!r}")

    return features


def linear_logits(policy: SoftPolicy, action_features: np.ndarray) -> np.ndarray:
    """
    Логиты ``kappa * log mu(a) + theta . psi(s, a)`` по заранее посчитанным признакам.

    :param policy: Линейная политика
    :param action_features: Признаки ``(n, A, F)``
    :return: Матрица ``(n, A)``
    """

    return policy.kappa * policy.reference_log_probs[None, :] + action_features @ policy.theta


def action_probabilities(
    policy: SoftPolicy,
    states: np.ndarray,
    features: Optional[FeatureMap] = None,
    action_features: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Распределения действий в заданных состояниях.

    :param policy: Политика
    :param states: Индексы (табличный случай) или матрица состояний ``(n, d)``
    :param features: Признаковое отображение (линейный случай)
    :param action_features: Уже посчитанные признаки ``(n, A, F)``
    :return: Матрица ``(n, A)``
    """

    if policy.representation == Representation.TABULAR:
        return policy.probs[np.asarray(states, dtype=np.int64).reshape(-1)]

    if action_features is None:
        action_features = _require_features(features, policy.feature_map_id).all_actions(states)

    return softmax(linear_logits(policy, action_features), axis=-1)


def q_values(
    q: QFunction,
    states: np.ndarray,
    features: Optional[FeatureMap] = None,
    action_features: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Значения ``Q(s, .)`` для всех действий в заданных состояниях.

    :param q: Q-функция
    :param states: Индексы или матрица состояний
    :param features: Признаковое отображение (линейный случай)
    :param action_features: Уже посчитанные признаки ``(n, A, F)``
    :return: Матрица ``(n, A)``
    """

    if q.representation == Representation.TABULAR:
        return q.values[np.asarray(states, dtype=np.int64).reshape(-1)]

    if action_features is None:
        action_features = _require_features(features, q.feature_map_id).all_actions(states)

    return action_features @ q.weights


def sample_categorical_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Векторизованный выбор индекса из каждой строки категориальных распределений.

    :param probs: Вероятности формы ``(n, K)``
    :param rng: Генератор
    :return:
    """

    cumulative = np.cumsum(probs, axis=-1)
    draws = rng.random(probs.shape[0]) * cumulative[:, -1]

    return np.minimum((cumulative <= draws[:, None]).sum(axis=-1), probs.shape[-1] - 1)
