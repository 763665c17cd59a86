"""
Признаковые отображения непрерывных состояний и их реестр.

Линейные Q-функции, политики и гауссовы модели динамики хранят только идентификатор отображения;
само отображение восстанавливается по документу через :func:`build_feature_map`.
Приложения регистрируют свои отображения в ``AppConfig.ready()``.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable

import numpy as np

from base.exceptions import ConfigurationError


class FeatureMap(ABC):
    """
    Признаки пар состояние–действие ``psi(s, a)`` над дискретной сеткой действий
    и описание допустимой области состояний.
    """

    feature_map_id: str

    @property
    @abstractmethod
    def dim(self) -> int:
        """
        Размерность ``psi(s, a)``.
        """

    @property
    @abstractmethod
    def n_actions(self) -> int:
        """
        Число действий в сетке.
        """

    @property
    @abstractmethod
    def state_dim(self) -> int:
        """
        Размерность состояния.
        """

    @abstractmethod
    def state_action(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """
        Признаки для пар ``(states[i], actions[i])``.

        :param states: Состояния формы ``(n, state_dim)``
        :param actions: Индексы действий формы ``(n,)``
        :return: Матрица ``(n, dim)``
        """

    @abstractmethod
    def clip_states(self, states: np.ndarray) -> np.ndarray:
        """
        Проекция состояний на допустимую область.

        :param states: Состояния формы ``(n, state_dim)``
        :return:
        """

    @abstractmethod
    def to_document(self) -> dict[str, Any]:
        """
        Параметры отображения (вместе с ``feature_map_id``) для сериализации.

        :return:
        """

    def all_actions(self, states: np.ndarray) -> np.ndarray:
        """
        Признаки всех действий для каждого состояния.

        :param states: Состояния формы ``(n, state_dim)``
        :return: Тензор ``(n, n_actions, dim)``
        """

        n_rows = states.shape[0]
        repeated = np.repeat(states, self.n_actions, axis=0)
        actions = np.tile(np.arange(self.n_actions), n_rows)

        return self.state_action(repeated, actions).reshape(n_rows, self.n_actions, self.dim)

    def is_terminal(self, states: np.ndarray) -> np.ndarray:
        """
        Признак терминальности состояний; по умолчанию терминальных состояний нет.

        :param states: Состояния формы ``(n, state_dim)``
        :return:
        """

        return np.zeros(states.shape[0], dtype=bool)


_REGISTRY: dict[str, Callable[[dict[str, Any]], FeatureMap]] = {}


def register_feature_map(feature_map_id: str, factory: Callable[[dict[str, Any]], FeatureMap]) -> None:
    """
    Регистрация фабрики признакового отображения.

    :param feature_map_id: Идентификатор
    :param factory: Фабрика, принимающая документ параметров
    :return:
    """

    _REGISTRY[feature_map_id] = factory


def build_feature_map(document: dict[str, Any]) -> FeatureMap:
    """
    Восстановление отображения по документу параметров.

    :param document: Документ с ключом ``feature_map_id``
    :return:
    """

    feature_map_id = document.get("feature_map_id")
    if feature_map_id not in _REGISTRY:
        raise ConfigurationError(f"unknown feature map {feature_map_id!r}; registered: {sorted(_REGISTRY)}")

    return _REGISTRY[feature_map_id](document)
