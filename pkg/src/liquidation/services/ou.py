"""
Точная дискретизация процесса Орнштейна–Уленбека для обменного курса.
"""

import numpy as np

from liquidation.services.shemas import OuParams
from mdp.services.shemas import SeedLike


def ou_transition(params: OuParams, rates: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """
    ``p' = mu + (p - mu) e^{-theta dt} + sigma sqrt((1 - e^{-2 theta dt}) / (2 theta)) xi``, ограничение снизу нулём.

    :param params: Параметры процесса
    :param rates: Текущие курсы
    :param normal: Стандартные нормальные величины той же формы
    :return:
    """

    next_rates = params.mu_rate + (rates - params.mu_rate) * params.decay + params.step_std * normal

    return np.maximum(next_rates, 0.0)


def ou_step(params: OuParams, rate: float, rng_seed: SeedLike) -> float:
    """
    Один шаг курса.

    :param params: Параметры процесса
    :param rate: Текущий курс, ``rate >= 0``
    :param rng_seed: Зерно или генератор
    :return:
    """

    if rate < 0.0:
        raise ValueError("rate must be non-negative")
    normal = np.random.default_rng(rng_seed).standard_normal()

    return float(ou_transition(params, np.asarray(rate), np.asarray(normal)))


def ou_path(params: OuParams, rate: float, n_steps: int, rng_seed: SeedLike) -> np.ndarray:
    """
    Траектория курса длины ``n_steps + 1`` (включая начальное значение).

    :param params: Параметры процесса
    :param rate: Начальный курс
    :param n_steps: Число шагов
    :param rng_seed: Зерно или генератор
    :return:
    """

    normal = np.random.default_rng(rng_seed).standard_normal(n_steps)
    path = np.empty(n_steps + 1)
    path[0] = rate
    decay, step_std, mu_rate = params.decay, params.step_std, params.mu_rate
    for step in range(n_steps):
        path[step + 1] = max(mu_rate + (path[step] - mu_rate) * decay + step_std * normal[step], 0.0)

    return path
