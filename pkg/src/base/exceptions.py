"""
Исключения предметной области.
"""

from typing import Optional


class PspoError(Exception):
    """
    Базовое исключение библиотеки.
    """


class DimensionMismatchError(PspoError):
    """
    Размерности входных данных не согласованы между собой.
    """


class InfiniteDivergenceError(PspoError):
    """
    KL-дивергенция бесконечна: опорное распределение равно нулю там, где сравниваемое положительно.
    """


class NormalizationError(PspoError):
    """
    Веса распределения невозможно нормировать (все веса обнулились).
    """


class UnsupportedOperationError(PspoError):
    """
    Операция не поддерживается для данного представления (например, точный оператор для непрерывных моделей).
    """


class EnvironmentDoneError(PspoError):
    """
    Попытка сделать шаг в завершённом эпизоде.
    """


class UnknownEnvironmentError(PspoError):
    """
    Для окружения не зарегистрированы эталонные значения.
    """


class ConfigurationError(PspoError):
    """
    Некорректная конфигурация эксперимента.
    """


class TrainingDivergenceError(PspoError):
    """
    Обучение модели динамики разошлось (правдоподобие стало неконечным).
    """

    def __init__(self, epoch: int, message: str = "") -> None:
        self.epoch = epoch
        super().__init__(message or f"Negative log-likelihood became non-finite at epoch {epoch}.")


class BisectionError(PspoError):
    """
    Поиск множителя Лагранжа бисекцией не сошёлся.
    """

    def __init__(self, lower: float, upper: float, kl_lower: float, kl_upper: float, epsilon: float) -> None:
        self.bracket = (lower, upper)
        self.kl_bracket = (kl_lower, kl_upper)
        self.epsilon = epsilon
        super().__init__(
            f"Bisection failed: lambda in [{lower:.9g}, {upper:.9g}], "
            f"KL in [{kl_upper:.9g}, {kl_lower:.9g}], epsilon={epsilon:.9g}."
        )


class IterationError(PspoError):
    """
    Ошибка внутри итерации обучения; содержит номер итерации.
    """

    def __init__(self, iteration: int, cause: Exception) -> None:
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"Iteration {iteration} failed: {cause}")


class MalformedCsvError(PspoError):
    """
    Ошибка разбора CSV-файла; содержит номер строки.
    """

    def __init__(self, path: str, line: Optional[int], message: str) -> None:
        self.path = path
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")


class MalformedDatasetError(PspoError):
    """
    Ошибка разбора файла набора данных (NDJSON); содержит номер строки.
    """

    def __init__(self, path: str, line: int, message: str) -> None:
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
