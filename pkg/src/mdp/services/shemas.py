"""
Описание моделей данных (DTO) конечного MDP, политик, Q-функций и переходов.
"""

from enum import Enum
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from pydantic import Field, root_validator, validator

from base.clients.shemas import ArrayModel, as_float_array

# допуск на нормировку вероятностных строк
SIMPLEX_TOLERANCE = 1e-12

State = Union[int, tuple[float, ...]]

SeedLike = Union[int, np.random.Generator, None]


class Representation(str, Enum):
    """
    Представление политики или Q-функции.
    """

    TABULAR = "tabular"
    LINEAR = "linear"


class Provenance(str, Enum):
    """
    Происхождение перехода: реальные данные или сгенерированные моделью.
    """

    REAL = "real"
    SYNTHETIC = "synthetic"


class ValueMode(str, Enum):
    """
    Способ получения ценности состояния из Q-функции.

    ``optimality`` – мягкая ценность относительно опорной политики, ``policy`` – математическое ожидание
    по текущей политике, ``regularized_policy`` – ожидание по политике со штрафом KL к опорной.
    """

    OPTIMALITY = "optimality"
    POLICY = "policy"
    REGULARIZED_POLICY = "regularized_policy"


class StateKind(str, Enum):
    """
    Тип пространства состояний набора данных.
    """

    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


def _check_simplex_rows(array: np.ndarray, name: str, tolerance: float = SIMPLEX_TOLERANCE) -> None:
    if np.any(array < 0.0):
        raise ValueError(f"{name} has negative entries")
    if np.any(np.abs(array.sum(axis=-1) - 1.0) > tolerance):
        raise ValueError(f"{name} rows must sum to 1")


class TabularMdp(ArrayModel):
    """
    Конечный MDP: тензор переходов, таблица наград, дисконт и начальное распределение.

    .. code-block::

        TabularMdp(
            n_states=1,
            n_actions=1,
            transition=[[[1.0]]],
            reward=[[1.0]],
            gamma=0.5,
            rho0=[1.0],
            r_max=1.0,
        )
    """

    n_states: int = Field(gt=0)
    n_actions: int = Field(gt=0)
    transition: np.ndarray
    reward: np.ndarray
    gamma: float = Field(ge=0.0, lt=1.0)
    rho0: np.ndarray
    r_max: float = Field(gt=0.0)

    @validator("transition", pre=True)
    def _transition(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(value, ndim=3)

    @validator("reward", pre=True)
    def _reward(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(value, ndim=2)

    @validator("rho0", pre=True)
    def _rho0(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(value, ndim=1)

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        n_states, n_actions = values["n_states"], values["n_actions"]
        if values["transition"].shape != (n_states, n_actions, n_states):
            raise ValueError("transition must have shape (n_states, n_actions, n_states)")
        if values["reward"].shape != (n_states, n_actions):
            raise ValueError("reward must have shape (n_states, n_actions)")
        if values["rho0"].shape != (n_states,):
            raise ValueError("rho0 must have shape (n_states,)")
        _check_simplex_rows(values["transition"], "transition")
        _check_simplex_rows(values["rho0"], "rho0")
        if np.any(np.abs(values["reward"]) > values["r_max"] + SIMPLEX_TOLERANCE):
            raise ValueError("rewards must be bounded by r_max")

        return values

    @property
    def value_bound(self) -> float:
        """
        Граница |Q| <= R_max / (1 - gamma).
        """

        return self.r_max / (1.0 - self.gamma)


class SoftPolicy(ArrayModel):
    """
    Категориальная политика.

    В табличном представлении хранит ``probs[s][a]``. В линейном представлении (непрерывный трек)
    логиты равны ``kappa * log mu(a) + theta . psi(s, a)``, где ``psi`` – признаки пары состояние–действие,
    а ``log mu`` – логарифм опорной политики, не зависящей от состояния.
    """

    representation: Representation = Representation.TABULAR
    probs: Optional[np.ndarray] = None
    kappa: float = 1.0
    theta: Optional[np.ndarray] = None
    reference_log_probs: Optional[np.ndarray] = None
    feature_map_id: Optional[str] = None

    @validator("probs", pre=True)
    def _probs(cls, value: object) -> Optional[np.ndarray]:  # pylint: disable=no-self-argument
        return None if value is None else as_float_array(value, ndim=2)

    @validator("theta", pre=True)
    def _theta(cls, value: object) -> Optional[np.ndarray]:  # pylint: disable=no-self-argument
        return None if value is None else as_float_array(value, ndim=1)

    @validator("reference_log_probs", pre=True)
    def _reference(cls, value: object) -> Optional[np.ndarray]:  # pylint: disable=no-self-argument
        if value is None:
            return None
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1 or np.any(np.isnan(array)) or np.any(array == np.inf):
            raise ValueError("reference_log_probs must be a vector of log-probabilities")
        array.setflags(write=False)

        return array

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["representation"] == Representation.TABULAR:
            if values.get("probs") is None:
                raise ValueError("tabular policy requires probs")
            _check_simplex_rows(values["probs"], "probs")
        else:
            if values.get("theta") is None or values.get("reference_log_probs") is None:
                raise ValueError("linear policy requires theta and reference_log_probs")

        return values

    @property
    def n_states(self) -> int:
        return int(self.probs.shape[0]) if self.probs is not None else 0

    @property
    def n_actions(self) -> int:
        if self.probs is not None:
            return int(self.probs.shape[1])

        return int(self.reference_log_probs.shape[0])

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "SoftPolicy":
        """
        Равномерная табличная политика.

        :param n_states: Число состояний
        :param n_actions: Число действий
        :return:
        """

        return cls(probs=np.full((n_states, n_actions), 1.0 / n_actions))


class QFunction(ArrayModel):
    """
    Оценки ценности действий: таблица ``values[s][a]`` или веса линейной модели над признаками пары.
    """

    representation: Representation = Representation.TABULAR
    values: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    feature_map_id: Optional[str] = None

    @validator("values", pre=True)
    def _values(cls, value: object) -> Optional[np.ndarray]:  # pylint: disable=no-self-argument
        return None if value is None else as_float_array(value, ndim=2)

    @validator("weights", pre=True)
    def _weights(cls, value: object) -> Optional[np.ndarray]:  # pylint: disable=no-self-argument
        return None if value is None else as_float_array(value, ndim=1)

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["representation"] == Representation.TABULAR and values.get("values") is None:
            raise ValueError("tabular Q-function requires values")
        if values["representation"] == Representation.LINEAR and values.get("weights") is None:
            raise ValueError("linear Q-function requires weights")

        return values

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QFunction":
        """
        Нулевая табличная Q-функция.

        :param n_states: Число состояний
        :param n_actions: Число действий
        :return:
        """

        return cls(values=np.zeros((n_states, n_actions)))


class TransitionRecord(ArrayModel):
    """
    Переход ``(s, a, r, s', done)`` с признаком происхождения.

    .. code-block::

        TransitionRecord(
            state=0,
            action=1,
            reward=0.5,
            next_state=2,
            done=False,
            provenance=Provenance.REAL,
        )
    """

    state: State
    action: int = Field(ge=0)
    reward: float
    next_state: State
    done: bool = False
    provenance: Provenance = Provenance.REAL

    @validator("reward")
    def _reward(cls, value: float) -> float:  # pylint: disable=no-self-argument
        if not np.isfinite(value):
            raise ValueError("reward must be finite")

        return value


class OfflineDataset(ArrayModel):
    """
    Набор переходов в колоночном представлении.

    ``states`` и ``next_states`` имеют форму ``(n, state_dim)``; для дискретных состояний ``state_dim = 1``
    и значения – индексы состояний. ``synthetic`` отмечает переходы, сгенерированные моделью.
    """

    kind: StateKind = StateKind.DISCRETE
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    synthetic: np.ndarray

    @validator("states", "next_states", pre=True)
    def _states(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        array = np.array(value, dtype=np.float64)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        array.setflags(write=False)

        return array

    @validator("actions", pre=True)
    def _actions(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        array = np.array(value, dtype=np.int64).reshape(-1)
        array.setflags(write=False)

        return array

    @validator("rewards", pre=True)
    def _rewards(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(np.reshape(value, -1), ndim=1)

    @validator("dones", "synthetic", pre=True)
    def _flags(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        array = np.array(value, dtype=bool).reshape(-1)
        array.setflags(write=False)

        return array

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        size = values["actions"].shape[0]
        for name in ("states", "rewards", "next_states", "dones", "synthetic"):
            if values[name].shape[0] != size:
                raise ValueError(f"column '{name}' has {values[name].shape[0]} rows, expected {size}")
        if values["states"].shape != values["next_states"].shape:
            raise ValueError("states and next_states must have the same shape")

        return values

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    @property
    def state_dim(self) -> int:
        return int(self.states.shape[1])

    def state_indices(self) -> np.ndarray:
        """
        Индексы состояний (дискретный набор).

        :return:
        """

        return self.states[:, 0].astype(np.int64)

    def next_state_indices(self) -> np.ndarray:
        """
        Индексы следующих состояний (дискретный набор).

        :return:
        """

        return self.next_states[:, 0].astype(np.int64)

    def subset(self, index: np.ndarray) -> "OfflineDataset":
        """
        Подвыборка строк по индексам или маске.

        :param index: Индексы или булева маска
        :return:
        """

        return OfflineDataset(
            kind=self.kind,
            states=self.states[index],
            actions=self.actions[index],
            rewards=self.rewards[index],
            next_states=self.next_states[index],
            dones=self.dones[index],
            synthetic=self.synthetic[index],
        )

    def real(self) -> "OfflineDataset":
        """
        Только реальные переходы.

        :return:
        """

        return self.subset(~self.synthetic)

    def records(self) -> Iterator[TransitionRecord]:
        """
        Итерация по переходам в виде :class:`TransitionRecord`.

        :return:
        """

        for row in range(len(self)):
            yield TransitionRecord(
                state=self._state_value(self.states[row]),
                action=int(self.actions[row]),
                reward=float(self.rewards[row]),
                next_state=self._state_value(self.next_states[row]),
                done=bool(self.dones[row]),
                provenance=Provenance.SYNTHETIC if self.synthetic[row] else Provenance.REAL,
            )

    def _state_value(self, row: np.ndarray) -> State:
        if self.kind == StateKind.DISCRETE:
            return int(row[0])

        return tuple(float(item) for item in row)

    @classmethod
    def from_records(cls, records: Sequence[TransitionRecord], kind: Optional[StateKind] = None) -> "OfflineDataset":
        """
        Формирование набора из списка переходов.

        :param records: Переходы
        :param kind: Тип состояний; по умолчанию определяется по первому переходу
        :return:
        """

        if kind is None:
            kind = StateKind.DISCRETE if records and isinstance(records[0].state, int) else StateKind.CONTINUOUS
        state_dim = 1 if kind == StateKind.DISCRETE else (len(records[0].state) if records else 1)

        return cls(
            kind=kind,
            states=np.array([np.atleast_1d(record.state) for record in records], dtype=np.float64).reshape(
                -1, state_dim
            ),
            actions=[record.action for record in records],
            rewards=[record.reward for record in records],
            next_states=np.array([np.atleast_1d(record.next_state) for record in records], dtype=np.float64).reshape(
                -1, state_dim
            ),
            dones=[record.done for record in records],
            synthetic=[record.provenance == Provenance.SYNTHETIC for record in records],
        )

    @classmethod
    def concatenate(cls, parts: Sequence["OfflineDataset"]) -> "OfflineDataset":
        """
        Объединение наборов одного типа.

        :param parts: Наборы
        :return:
        """

        return cls(
            kind=parts[0].kind,
            states=np.concatenate([part.states for part in parts]),
            actions=np.concatenate([part.actions for part in parts]),
            rewards=np.concatenate([part.rewards for part in parts]),
            next_states=np.concatenate([part.next_states for part in parts]),
            dones=np.concatenate([part.dones for part in parts]),
            synthetic=np.concatenate([part.synthetic for part in parts]),
        )
