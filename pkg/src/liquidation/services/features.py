"""
Признаки состояний и пар состояние–действие для задачи ликвидации.

Признаки состояния ``phi(s)`` (23 компоненты) для нормированных ``tau = t/T``, ``x = m/M``, ``y = p/cap``::

    [1, tau, x, y, tau*x, tau*y, x*y, x * rbf_1(tau, y), ..., x * rbf_16(tau, y)]

где ``rbf_k`` – гауссовы функции на сетке 4x4 центров в ``[0, 1]^2``. Признаки пары
``psi(s, a) = [(1 - f) phi(s), f phi(s)]``, ``f`` – доля конвертации действия (0 для "держать").
В этих признаках награда, остаток и среднее следующего курса линейны.
"""

import logging
from typing import Any

import numpy as np

from liquidation.services.shemas import LiquidationConfig
from mdp.services.features import FeatureMap

logger = logging.getLogger()

FEATURE_MAP_ID = "liquidation-rbf-v1"
RBF_GRID = 4
STATE_FEATURES = 7 + RBF_GRID * RBF_GRID


class LiquidationFeatures(FeatureMap):
    """
    Признаковое отображение для окружения ликвидации.
    """

    feature_map_id = FEATURE_MAP_ID

    def __init__(
        self,
        horizon: int,
        initial_inventory: float,
        rate_cap: float,
        action_grid: list[float],
        inventory_epsilon: float = 1e-2,
    ) -> None:
        """
        Конструктор.

        :param horizon: Горизонт ``T``
        :param initial_inventory: Начальный объём ``M``
        :param rate_cap: Верхняя граница курса
        :param action_grid: Доли конвертации действий
        :param inventory_epsilon: Остаток, ниже которого эпизод модели считается завершённым
        """

        self.horizon = horizon
        self.initial_inventory = initial_inventory
        self.rate_cap = rate_cap
        self.action_grid = list(action_grid)
        self.inventory_epsilon = inventory_epsilon
        self.fractions = np.asarray(action_grid, dtype=np.float64)
        centers = np.linspace(0.0, 1.0, RBF_GRID)
        self.centers = np.array([(tau, rate) for tau in centers for rate in centers])
        self.width = 1.0 / (RBF_GRID - 1)
        # число состояний, спроецированных на допустимую область
        self.clip_count = 0

    @classmethod
    def from_config(cls, config: LiquidationConfig) -> "LiquidationFeatures":
        """
        Отображение для конфигурации окружения.

        :param config: Конфигурация окружения
        :return:
        """

        return cls(config.horizon, config.initial_inventory, config.rate_cap, config.action_grid)

    @classmethod
    def from_document(cls, document: dict[str, Any]) -> "LiquidationFeatures":
        return cls(
            horizon=int(document["horizon"]),
            initial_inventory=float(document["initial_inventory"]),
            rate_cap=float(document["rate_cap"]),
            action_grid=[float(value) for value in document["action_grid"]],
            inventory_epsilon=float(document.get("inventory_epsilon", 1e-2)),
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "feature_map_id": self.feature_map_id,
            "horizon": self.horizon,
            "initial_inventory": self.initial_inventory,
            "rate_cap": self.rate_cap,
            "action_grid": self.action_grid,
            "inventory_epsilon": self.inventory_epsilon,
        }

    @property
    def dim(self) -> int:
        return 2 * STATE_FEATURES

    @property
    def n_actions(self) -> int:
        return len(self.action_grid)

    @property
    def state_dim(self) -> int:
        return 3

    @property
    def upper(self) -> np.ndarray:
        return np.array([float(self.horizon), self.initial_inventory, self.rate_cap])

    def clip_states(self, states: np.ndarray) -> np.ndarray:
        clipped = np.clip(states, 0.0, self.upper)
        outside = int(np.any(clipped != states, axis=1).sum())
        if outside:
            self.clip_count += outside
            logger.debug("Clipped %s states to the valid box (total %s).", outside, self.clip_count)

        return clipped

    def state_features(self, states: np.ndarray) -> np.ndarray:
        """
        Признаки состояний ``phi(s)``.

        :param states: Состояния ``(n, 3)``
        :return: Матрица ``(n, 23)``
        """

        normalized = self.clip_states(np.atleast_2d(states)) / self.upper
        tau, inventory, rate = normalized[:, 0], normalized[:, 1], normalized[:, 2]
        distances = (tau[:, None] - self.centers[None, :, 0]) ** 2 + (rate[:, None] - self.centers[None, :, 1]) ** 2
        rbf = np.exp(-distances / (2.0 * self.width**2)) * inventory[:, None]
        base = np.column_stack(
            [np.ones_like(tau), tau, inventory, rate, tau * inventory, tau * rate, inventory * rate]
        )

        return np.hstack([base, rbf])

    def state_action(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        phi = self.state_features(states)
        fractions = self.fractions[np.asarray(actions, dtype=np.int64)][:, None]

        return np.hstack([(1.0 - fractions) * phi, fractions * phi])

    def all_actions(self, states: np.ndarray) -> np.ndarray:
        phi = self.state_features(states)
        fractions = self.fractions[None, :, None]

        return np.concatenate([(1.0 - fractions) * phi[:, None, :], fractions * phi[:, None, :]], axis=-1)

    def is_terminal(self, states: np.ndarray) -> np.ndarray:
        return (states[:, 0] >= self.horizon - 0.5) | (states[:, 1] <= self.inventory_epsilon)
