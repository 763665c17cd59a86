"""
Оценка политики стохастической аппроксимацией: цели со свежей выборкой модели и шаги Роббинса–Монро.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel

from base.clients.shemas import ArrayModel, as_float_array
from belief.services.posterior import sample_models
from mdp.services.shemas import QFunction, SeedLike, ValueMode
from pspo.services.operators import OperatorContext, next_state_values
from pspo.services.shemas import LearningRateSchedule

logger = logging.getLogger()

# относительный допуск сравнения дисперсии с границей
VARIANCE_TOLERANCE = 1e-12


class VarianceCheck(BaseModel):
    """
    Выборочная дисперсия целей и граница ``R_max^2 / (1 - gamma)^2``.
    """

    variance: float
    bound: float
    passed: bool


class TargetSummary(ArrayModel):
    """
    Цели ``Y_t`` одного шага и использованный размер шага.
    """

    step: int
    rate: float
    targets: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.targets.mean())

    @property
    def variance(self) -> float:
        return float(self.targets.var())


def value_bound(r_max: float, gamma: float) -> float:
    return r_max / (1.0 - gamma)


def variance_bound_check(samples: np.ndarray, r_max: float, gamma: float) -> VarianceCheck:
    """
    Сравнение выборочной (смещённой) дисперсии целей с границей ``R_max^2 / (1 - gamma)^2``.

    :param samples: Цели, не меньше двух
    :param r_max: Граница наград
    :param gamma: Дисконт
    :return:
    """

    values = np.asarray(samples, dtype=np.float64).reshape(-1)
    if values.size < 2:
        raise ValueError("variance check requires at least two samples")
    variance = float(values.var())
    bound = value_bound(r_max, gamma) ** 2

    return VarianceCheck(variance=variance, bound=bound, passed=variance <= bound * (1.0 + VARIANCE_TOLERANCE))


def sample_targets(
    q: QFunction,
    states: np.ndarray,
    actions: np.ndarray,
    context: OperatorContext,
    mode: ValueMode,
    r_max: float,
    rng_seed: SeedLike,
) -> np.ndarray:
    """
    Цели ``Y(s,a) = r_T(s,a) + gamma E_{s' ~ T} V(s')``, по одной свежей модели ``T ~ P(T|E)`` на запрос.

    Значения Q перед вычислением ``V`` ограничиваются по модулю ``R_max / (1 - gamma)``.

    :param q: Q-функция, из которой берётся ``V``
    :param states: Индексы состояний запросов
    :param actions: Действия запросов
    :param context: Контекст оператора
    :param mode: Режим оценки
    :param r_max: Граница наград
    :param rng_seed: Зерно или генератор
    :return:
    """

    states = np.asarray(states, dtype=np.int64).reshape(-1)
    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    bound = value_bound(r_max, context.gamma)
    clamped = np.clip(q.values, -bound, bound)
    values = np.clip(next_state_values(clamped, context, mode), -bound, bound)

    models = sample_models(context.belief, states.size, rng_seed)
    transitions = context.ensemble.transition_tensor()[models, states, actions]
    rewards = np.clip(context.ensemble.reward_tensor()[models, states, actions], -r_max, r_max)

    return rewards + context.gamma * transitions @ values


def stochastic_q_update(
    q: QFunction,
    states: np.ndarray,
    actions: np.ndarray,
    context: OperatorContext,
    mode: ValueMode,
    step: int,
    schedule: LearningRateSchedule,
    r_max: float,
    rng_seed: SeedLike,
    target: Optional[QFunction] = None,
) -> tuple[QFunction, TargetSummary]:
    """
    Один шаг ``Q(s,a) <- Q(s,a) + eta_t (Y_t(s,a) - Q(s,a))`` для каждого запроса.

    Цели считаются по Q на начало шага (или по целевой сети ``target``), обновления применяются
    последовательно, так что повторная пара получает несколько шагов.

    :param q: Текущая Q-функция
    :param states: Индексы состояний
    :param actions: Действия
    :param context: Контекст оператора
    :param mode: Режим оценки
    :param step: Номер шага расписания
    :param schedule: Расписание шага
    :param r_max: Граница наград
    :param rng_seed: Зерно или генератор
    :param target: Q-функция для вычисления ``V``; по умолчанию ``q``
    :return: Новая Q-функция и сводка целей
    """

    states = np.asarray(states, dtype=np.int64).reshape(-1)
    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    targets = sample_targets(q if target is None else target, states, actions, context, mode, r_max, rng_seed)
    rate = schedule.rate(step)

    values = np.array(q.values)
    for state, action, value in zip(states, actions, targets):
        values[state, action] += rate * (value - values[state, action])

    return QFunction(values=values), TargetSummary(step=step, rate=rate, targets=as_float_array(targets, ndim=1))
