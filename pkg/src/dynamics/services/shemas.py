"""
Описание моделей данных (DTO) моделей динамики и их ансамбля.
"""

from enum import Enum
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import Field, root_validator, validator

from base.clients.shemas import ArrayModel, as_float_array
from mdp.services.features import FeatureMap

# границы логарифма стандартного отклонения гауссовой модели
LOG_STD_MIN = float(np.log(1e-3))
LOG_STD_MAX = float(np.log(10.0))


class ModelKind(str, Enum):
    """
    Тип моделей ансамбля.
    """

    CATEGORICAL = "categorical"
    GAUSSIAN = "gaussian"


class CategoricalModel(ArrayModel):
    """
    Табличная модель переходов на счётчиках с псевдосчётчиком ``smoothing``
    и эмпирическими средними наградами.
    """

    kind: Literal["categorical"] = "categorical"
    counts: np.ndarray
    smoothing: float = Field(1e-3, ge=0.0)
    reward_estimate: np.ndarray
    seed: Optional[int] = None

    @validator("counts", pre=True)
    def _counts(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        array = as_float_array(value, ndim=3)
        if np.any(array < 0.0):
            raise ValueError("counts must be non-negative")

        return array

    @validator("reward_estimate", pre=True)
    def _reward(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(value, ndim=2)

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["counts"].shape[:2] != values["reward_estimate"].shape:
            raise ValueError("reward_estimate must have shape (n_states, n_actions)")
        if values["counts"].shape[0] != values["counts"].shape[2]:
            raise ValueError("counts must have shape (n_states, n_actions, n_states)")

        return values

    @property
    def n_states(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.counts.shape[1])

    @property
    def probs(self) -> np.ndarray:
        """
        Сглаженные вероятности переходов ``(c + delta) / sum``; пустые строки равномерны.

        :return:
        """

        smoothed = self.counts + self.smoothing
        totals = smoothed.sum(axis=-1, keepdims=True)
        probs = np.where(totals > 0.0, smoothed / np.where(totals > 0.0, totals, 1.0), 1.0 / self.n_states)

        return probs / probs.sum(axis=-1, keepdims=True)


class GaussianModel(ArrayModel):
    """
    Линейно-гауссова модель: среднее ``(s', r)`` линейно по признакам ``psi(s, a)``,
    стандартное отклонение своё для каждого выхода и не зависит от состояния.

    Столбцы ``mean_weights`` соответствуют компонентам следующего состояния, последний – награде.
    """

    kind: Literal["gaussian"] = "gaussian"
    mean_weights: np.ndarray
    log_std: np.ndarray
    feature_map_id: str
    seed: Optional[int] = None

    @validator("mean_weights", pre=True)
    def _weights(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(value, ndim=2)

    @validator("log_std", pre=True)
    def _log_std(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        array = as_float_array(value, ndim=1)
        if np.any(array < LOG_STD_MIN - 1e-12) or np.any(array > LOG_STD_MAX + 1e-12):
            raise ValueError("log_std must lie within the clamp range")

        return array

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["mean_weights"].shape[1] != values["log_std"].shape[0]:
            raise ValueError("log_std must have one entry per output")

        return values

    @property
    def state_dim(self) -> int:
        return int(self.log_std.shape[0]) - 1

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def predict(self, features: np.ndarray) -> np.ndarray:
        """
        Предсказанные средние ``(s', r)``.

        :param features: Признаки ``(n, F)``
        :return: Матрица ``(n, state_dim + 1)``
        """

        return features @ self.mean_weights

    def sample(self, features: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """
        Выборка ``mean + std * noise``.

        :param features: Признаки ``(n, F)``
        :param noise: Стандартный нормальный шум ``(n, state_dim + 1)`` или ``(n, k, state_dim + 1)``
        :return:
        """

        mean = self.predict(features)
        if noise.ndim == 3:
            mean = mean[:, None, :]

        return mean + self.std * noise


DynamicsModel = Union[CategoricalModel, GaussianModel]


class ModelEnsemble(ArrayModel):
    """
    Ансамбль из ``N`` однотипных моделей динамики.

    Если задан ``pool``, активные модели выбраны из него по индексам ``active_indices``.
    Для гауссовых моделей ансамбль хранит общее признаковое отображение.
    """

    kind: ModelKind
    members: list[DynamicsModel]
    pool: Optional[list[DynamicsModel]] = None
    active_indices: Optional[list[int]] = None
    feature_map: Optional[FeatureMap] = None

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        members, kind = values["members"], values["kind"]
        if not members:
            raise ValueError("ensemble must contain at least one model")
        if any(member.kind != kind.value for member in members + (values.get("pool") or [])):
            raise ValueError(f"all models must be of kind {kind.value}")
        if values.get("pool") is not None:
            pool, active = values["pool"], values.get("active_indices")
            if active is None or len(active) != len(members) or len(members) > len(pool):
                raise ValueError("active_indices must select every member from the pool")
            for index, member in zip(active, members):
                if not 0 <= index < len(pool) or pool[index].to_document() != member.to_document():
                    raise ValueError("members must be drawn from the pool")
        if kind == ModelKind.GAUSSIAN and values.get("feature_map") is None:
            raise ValueError("gaussian ensemble requires a feature map")

        return values

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def n_states(self) -> int:
        return self.members[0].n_states if self.kind == ModelKind.CATEGORICAL else 0

    @property
    def n_actions(self) -> int:
        if self.kind == ModelKind.CATEGORICAL:
            return self.members[0].n_actions

        return self.feature_map.n_actions

    def transition_tensor(self) -> np.ndarray:
        """
        Вероятности переходов всех моделей ``(N, S, A, S)``.

        :return:
        """

        return np.stack([member.probs for member in self.members])

    def reward_tensor(self) -> np.ndarray:
        """
        Оценки наград всех моделей ``(N, S, A)``.

        :return:
        """

        return np.stack([member.reward_estimate for member in self.members])

    def to_document(self) -> dict[str, Any]:
        document = {
            "kind": self.kind.value,
            "members": [member.to_document() for member in self.members],
            "pool": None if self.pool is None else [model.to_document() for model in self.pool],
            "active_indices": self.active_indices,
            "feature_map": None if self.feature_map is None else self.feature_map.to_document(),
        }

        return document
