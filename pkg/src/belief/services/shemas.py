"""
Описание моделей данных (DTO) апостериорного распределения над ансамблем моделей.
"""

from typing import Optional

import numpy as np
from pydantic import Field, root_validator, validator

from base.clients.shemas import ArrayModel, as_float_array

# допуск на нормировку весов
WEIGHTS_TOLERANCE = 1e-12


def _check_weights(array: np.ndarray, name: str) -> None:
    if np.any(array < 0.0):
        raise ValueError(f"{name} has negative weights")
    if abs(float(array.sum()) - 1.0) > WEIGHTS_TOLERANCE:
        raise ValueError(f"{name} must sum to 1")


class Belief(ArrayModel):
    """
    Априорные и апостериорные веса моделей ансамбля и обратная температура ``beta``.

    .. code-block::

        Belief(prior=[0.5, 0.5], posterior=[0.5, 0.5], beta=1.0)
    """

    prior: np.ndarray
    posterior: np.ndarray
    beta: float = Field(1.0, ge=0.0)
    iteration: int = 0

    @validator("prior", "posterior", pre=True)
    def _weights(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        return as_float_array(value, ndim=1)

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["prior"].shape != values["posterior"].shape:
            raise ValueError("prior and posterior must have the same length")
        _check_weights(values["prior"], "prior")
        _check_weights(values["posterior"], "posterior")

        return values

    @property
    def size(self) -> int:
        return int(self.prior.shape[0])

    @classmethod
    def uniform(cls, size: int, beta: float = 1.0, prior: Optional[np.ndarray] = None) -> "Belief":
        """
        Начальное распределение: апостериорные веса равны априорным (по умолчанию равномерным).

        :param size: Число моделей
        :param beta: Обратная температура
        :param prior: Априорные веса
        :return:
        """

        weights = np.full(size, 1.0 / size) if prior is None else np.asarray(prior, dtype=np.float64)

        return cls(prior=weights, posterior=weights, beta=beta)

    def with_posterior(self, posterior: np.ndarray, iteration: Optional[int] = None) -> "Belief":
        """
        Новый экземпляр с заменёнными апостериорными весами.

        :param posterior: Веса
        :param iteration: Номер итерации
        :return:
        """

        return Belief(
            prior=self.prior,
            posterior=posterior / posterior.sum(),
            beta=self.beta,
            iteration=self.iteration if iteration is None else iteration,
        )


class ConsistencyScore(ArrayModel):
    """
    Оценки согласованности моделей с данными (средний квадрат TD-невязки); меньше – лучше.
    """

    scores: np.ndarray

    @validator("scores", pre=True)
    def _scores(cls, value: object) -> np.ndarray:  # pylint: disable=no-self-argument
        array = as_float_array(value, ndim=1)
        if np.any(array < 0.0):
            raise ValueError("scores must be non-negative")

        return array

    @property
    def size(self) -> int:
        return int(self.scores.shape[0])
