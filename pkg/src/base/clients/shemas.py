"""
Описание базовых моделей данных (DTO).
"""

from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel


class ArrayModel(BaseModel):
    """
    Неизменяемая модель данных с полями-массивами numpy.

    Массивы сериализуются в JSON вложенными списками.
    """

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        json_encoders = {np.ndarray: lambda value: value.tolist()}

    def to_document(self) -> dict[str, Any]:
        """
        Представление модели в виде JSON-совместимого словаря.

        :return:
        """

        return _to_builtin(self.dict())


def as_float_array(value: Any, ndim: int) -> np.ndarray:
    """
    Приведение значения к массиву float64 заданной размерности.

    :param value: Исходное значение (список или массив)
    :param ndim: Ожидаемое число измерений
    :return:
    """

    array = np.array(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("array contains non-finite values")
    array.setflags(write=False)

    return array


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {key: _to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(item) for item in value]
    if isinstance(value, Enum):
        return value.value

    return value
