"""
Операторы Беллмана с выборкой модели из апостериорного распределения (табличный случай).

Выборка модели на каждом шаге из фиксированного распределения эквивалентна переходу по смеси ядер,
поэтому точное применение операторов идёт через ядро смеси ``sum_i w_i T_i``.
"""

import logging
from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, Field

from base.exceptions import DimensionMismatchError, UnsupportedOperationError
from belief.services.posterior import mixture_kernel
from belief.services.shemas import Belief
from dynamics.services.shemas import ModelEnsemble, ModelKind
from mdp.services.divergence import state_values
from mdp.services.evaluation import solve_q_values
from mdp.services.shemas import QFunction, Representation, SoftPolicy, ValueMode

logger = logging.getLogger()

# допуск остановки итераций оптимального оператора
FIXED_POINT_TOLERANCE = 1e-12
MAX_FIXED_POINT_ITERATIONS = 100_000


class OperatorTag(str, Enum):
    """
    Оператор Беллмана: оценки политики, оптимальности или оценки со штрафом KL.
    """

    EVALUATION = "evaluation"
    OPTIMALITY = "optimality"
    REGULARIZED_EVALUATION = "regularized_evaluation"

    @classmethod
    def for_mode(cls, mode: ValueMode) -> "OperatorTag":
        return {
            ValueMode.POLICY: cls.EVALUATION,
            ValueMode.OPTIMALITY: cls.OPTIMALITY,
            ValueMode.REGULARIZED_POLICY: cls.REGULARIZED_EVALUATION,
        }[mode]

    @property
    def mode(self) -> ValueMode:
        return {
            OperatorTag.EVALUATION: ValueMode.POLICY,
            OperatorTag.OPTIMALITY: ValueMode.OPTIMALITY,
            OperatorTag.REGULARIZED_EVALUATION: ValueMode.REGULARIZED_POLICY,
        }[self]


class OperatorContext(BaseModel):
    """
    Всё, от чего зависит оператор, кроме самой Q-функции.

    ``policy`` обязательна для операторов оценки, ``reference`` – для оптимального оператора
    и оценки со штрафом KL.
    """

    ensemble: ModelEnsemble
    belief: Belief
    gamma: float = Field(ge=0.0, lt=1.0)
    alpha: float = Field(1.0, gt=0.0)
    policy: Optional[SoftPolicy] = None
    reference: Optional[SoftPolicy] = None

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    def kernel(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Переходы и награды смеси моделей.

        :return:
        """

        if self.ensemble.kind != ModelKind.CATEGORICAL:
            raise UnsupportedOperationError(
                "exact posterior operators require categorical models; use stochastic_q_update"
            )

        return mixture_kernel(self.belief, self.ensemble)

    def probs(self, name: str) -> np.ndarray:
        policy = getattr(self, name)
        if policy is None:
            raise ValueError(f"operator requires a {name} policy")
        if policy.representation != Representation.TABULAR:
            raise DimensionMismatchError(f"{name} policy must be tabular")
        if policy.probs.shape != (self.ensemble.n_states, self.ensemble.n_actions):
            raise DimensionMismatchError(
                f"{name} shape {policy.probs.shape} does not match "
                f"({self.ensemble.n_states}, {self.ensemble.n_actions})"
            )

        return policy.probs


def _check_q(q: QFunction, context: OperatorContext) -> np.ndarray:
    if q.representation != Representation.TABULAR:
        raise UnsupportedOperationError("exact posterior operators require a tabular Q-function")
    expected = (context.ensemble.n_states, context.ensemble.n_actions)
    if q.values.shape != expected:
        raise DimensionMismatchError(f"Q shape {q.values.shape} does not match {expected}")

    return q.values


def next_state_values(q_values: np.ndarray, context: OperatorContext, mode: ValueMode) -> np.ndarray:
    """
    Ценности ``V(s')`` для всех состояний в выбранном режиме.

    :param q_values: Таблица Q
    :param context: Контекст оператора
    :param mode: Режим оценки
    :return: Вектор ``(S,)``
    """

    if mode == ValueMode.OPTIMALITY:
        reference_probs = context.probs("reference")
        return state_values(q_values, reference_probs, reference_probs, context.alpha, mode)
    if mode == ValueMode.POLICY:
        policy_probs = context.probs("policy")
        return state_values(q_values, policy_probs, policy_probs, context.alpha, mode)

    return state_values(q_values, context.probs("policy"), context.probs("reference"), context.alpha, mode)


def _apply(q: QFunction, context: OperatorContext, mode: ValueMode) -> QFunction:
    transition, reward = context.kernel()
    values = _check_q(q, context)

    return QFunction(values=reward + context.gamma * transition @ next_state_values(values, context, mode))


def posterior_eval_operator(q: QFunction, context: OperatorContext) -> QFunction:
    """
    ``(B^pi Q)(s,a) = r(s,a) + gamma E_{T ~ P(T|E), s' ~ T, a' ~ pi} Q(s', a')``.

    :param q: Q-функция
    :param context: Контекст с политикой ``pi``
    :return:
    """

    return _apply(q, context, ValueMode.POLICY)


def posterior_opt_operator(q: QFunction, context: OperatorContext) -> QFunction:
    """
    ``(B* Q)(s,a) = r(s,a) + gamma E_{T, s'} [alpha log E_mu exp(Q(s', a') / alpha)]``.

    :param q: Q-функция
    :param context: Контекст с опорной политикой ``mu`` и ``alpha``
    :return:
    """

    return _apply(q, context, ValueMode.OPTIMALITY)


def posterior_regularized_eval_operator(q: QFunction, context: OperatorContext) -> QFunction:
    """
    Оценка политики со штрафом: ``V(s') = E_pi Q(s', .) - alpha KL(pi(.|s') || mu(.|s'))``.

    :param q: Q-функция
    :param context: Контекст с политикой, опорной политикой и ``alpha``
    :return:
    """

    return _apply(q, context, ValueMode.REGULARIZED_POLICY)


OPERATORS: dict[OperatorTag, Callable[[QFunction, OperatorContext], QFunction]] = {
    OperatorTag.EVALUATION: posterior_eval_operator,
    OperatorTag.OPTIMALITY: posterior_opt_operator,
    OperatorTag.REGULARIZED_EVALUATION: posterior_regularized_eval_operator,
}


def apply_operator(tag: OperatorTag, q: QFunction, context: OperatorContext) -> QFunction:
    return OPERATORS[tag](q, context)


def iterate_operator(
    tag: OperatorTag,
    context: OperatorContext,
    q0: Optional[QFunction] = None,
    iterations: Optional[int] = None,
    tolerance: float = FIXED_POINT_TOLERANCE,
) -> QFunction:
    """
    Последовательное применение оператора.

    При заданном ``iterations`` выполняется ровно столько применений, иначе итерации идут до изменения
    не больше ``tolerance`` в max-норме.

    :param tag: Оператор
    :param context: Контекст
    :param q0: Начальная Q-функция; по умолчанию нулевая
    :param iterations: Число применений
    :param tolerance: Допуск остановки
    :return:
    """

    q = QFunction.zeros(context.ensemble.n_states, context.ensemble.n_actions) if q0 is None else q0
    limit = MAX_FIXED_POINT_ITERATIONS if iterations is None else iterations
    for step in range(limit):
        updated = apply_operator(tag, q, context)
        change = float(np.max(np.abs(updated.values - q.values)))
        q = updated
        if iterations is None and change <= tolerance:
            logger.debug("Operator %s converged after %s applications.", tag.value, step + 1)
            break
    else:
        if iterations is None:
            logger.warning("Operator %s did not converge within %s applications.", tag.value, limit)

    return q


def exact_fixed_point(tag: OperatorTag, context: OperatorContext, q0: Optional[QFunction] = None) -> QFunction:
    """
    Неподвижная точка оператора: линейное решение для операторов оценки, итерации для оптимального.

    :param tag: Оператор
    :param context: Контекст
    :param q0: Начальное приближение оптимального оператора
    :return:
    """

    if tag == OperatorTag.OPTIMALITY:
        return iterate_operator(tag, context, q0=q0)

    transition, reward = context.kernel()
    policy_probs = context.probs("policy")
    if tag == OperatorTag.EVALUATION:
        return QFunction(values=solve_q_values(transition, reward, context.gamma, policy_probs))

    # штраф в V(s') сдвигает решение с наградой r - alpha KL(s) на alpha KL(s)
    penalty = -state_values(np.zeros_like(reward), policy_probs, context.probs("reference"), context.alpha, tag.mode)
    values = solve_q_values(transition, reward - penalty[:, None], context.gamma, policy_probs)

    return QFunction(values=values + penalty[:, None])
