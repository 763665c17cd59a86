"""
Исполняемые проверки свойств алгоритма: сжатие операторов и условие монотонного улучшения.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel
from scipy import linalg
from scipy.special import softmax

from base.exceptions import DimensionMismatchError
from mdp.services.divergence import kl_rows
from mdp.services.evaluation import discounted_occupancy, solve_q_values
from mdp.services.shemas import QFunction, SoftPolicy, TabularMdp
from pspo.services.operators import OperatorContext, OperatorTag, apply_operator

logger = logging.getLogger()

CONTRACTION_TOLERANCE = 1e-10
# сингулярные числа ниже этой доли максимального считаются нулевыми
RANK_TOLERANCE = 1e-10


class ContractionCheck(BaseModel):
    lhs: float
    rhs: float
    passed: bool


class ImprovementCondition(BaseModel):
    """
    ``lhs = <grad J, grad J>_F``, ``rhs = <grad J, grad C>_F``, где ``C = J - J~``, а скалярное произведение
    задаётся псевдообратной матрицей Фишера, взвешенной частотой посещения состояний.
    """

    lhs: float
    rhs: float
    holds: bool
    rank: int
    expected_rank: int
    condition_number: float
    warning: Optional[str] = None


def contraction_check(tag: OperatorTag, q1: QFunction, q2: QFunction, context: OperatorContext) -> ContractionCheck:
    """
    Проверка ``||B Q1 - B Q2||_inf <= gamma ||Q1 - Q2||_inf``.

    :param tag: Оператор
    :param q1: Первая Q-функция
    :param q2: Вторая Q-функция
    :param context: Контекст оператора
    :return:
    """

    lhs = float(np.max(np.abs(apply_operator(tag, q1, context).values - apply_operator(tag, q2, context).values)))
    rhs = context.gamma * float(np.max(np.abs(q1.values - q2.values)))
    passed = lhs <= rhs + CONTRACTION_TOLERANCE
    if not passed:
        logger.warning("Operator %s violates contraction: %.9g > %.9g.", tag.value, lhs, rhs)

    return ContractionCheck(lhs=lhs, rhs=rhs, passed=passed)


def _returns(mdp: TabularMdp, probs: np.ndarray, reference_probs: np.ndarray, alpha: float) -> tuple[float, float]:
    # J и J~ одной политики
    values = solve_q_values(mdp.transition, mdp.reward, mdp.gamma, probs)
    objective = float(mdp.rho0 @ np.einsum("sa,sa->s", probs, values))
    penalty = alpha * kl_rows(probs, reference_probs)
    regularized = solve_q_values(mdp.transition, mdp.reward - penalty[:, None], mdp.gamma, probs)

    return objective, float(mdp.rho0 @ np.einsum("sa,sa->s", probs, regularized))


def finite_difference_gradients(
    mdp: TabularMdp,
    policy: SoftPolicy,
    reference: SoftPolicy,
    alpha: float,
    fd_step: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Центральные конечные разности ``J`` и ``C = J - J~`` по логитам ``log pi(a|s)``.

    :param mdp: MDP
    :param policy: Строго положительная табличная политика
    :param reference: Опорная политика
    :param alpha: Сила регуляризации
    :param fd_step: Шаг разностей
    :return: Градиенты ``J`` и ``C`` формы ``(S * A,)``
    """

    if policy.probs.shape != (mdp.n_states, mdp.n_actions) or reference.probs.shape != policy.probs.shape:
        raise DimensionMismatchError("policies must match the MDP dimensions")
    if np.any(policy.probs <= 0.0):
        raise ValueError("finite differences on logits require a strictly positive policy")

    logits = np.log(policy.probs)
    gradient_j = np.zeros(logits.size)
    gradient_c = np.zeros(logits.size)
    for index in range(logits.size):
        state, action = divmod(index, mdp.n_actions)
        values = []
        for sign in (1.0, -1.0):
            shifted = logits.copy()
            shifted[state, action] += sign * fd_step
            probs = policy.probs.copy()
            probs[state] = softmax(shifted[state])
            values.append(_returns(mdp, probs, reference.probs, alpha))
        (j_plus, tilde_plus), (j_minus, tilde_minus) = values
        gradient_j[index] = (j_plus - j_minus) / (2.0 * fd_step)
        gradient_c[index] = ((j_plus - tilde_plus) - (j_minus - tilde_minus)) / (2.0 * fd_step)

    return gradient_j, gradient_c


def fisher_matrix(mdp: TabularMdp, policy: SoftPolicy) -> np.ndarray:
    """
    Блочно-диагональная матрица Фишера категориальной политики по логитам, блок состояния ``s``
    равен ``d(s) (diag pi - pi pi^T)``, ``d`` – дисконтированная частота посещения.

    :param mdp: MDP
    :param policy: Политика
    :return: Матрица ``(S * A, S * A)``
    """

    occupancy = discounted_occupancy(mdp, policy)
    blocks = [
        weight * (np.diag(row) - np.outer(row, row)) for weight, row in zip(occupancy, policy.probs)
    ]

    return linalg.block_diag(*blocks)


def improvement_condition_check(
    mdp: TabularMdp,
    policy: SoftPolicy,
    reference: SoftPolicy,
    alpha: float,
    fd_step: float = 1e-4,
) -> ImprovementCondition:
    """
    Условие ``||grad J||_F^2 > <grad J, grad C>_F`` в точке ``pi``.

    Матрица Фишера вырождена (логиты определены с точностью до сдвига), поэтому используется
    псевдообратная; ожидаемый ранг ``S (A - 1)`` при положительной частоте посещения всех состояний.

    :param mdp: MDP
    :param policy: Строго положительная политика
    :param reference: Опорная политика
    :param alpha: Сила регуляризации
    :param fd_step: Шаг конечных разностей в ``[1e-6, 1e-3]``
    :return:
    """

    if not 1e-6 <= fd_step <= 1e-3:
        raise ValueError("fd_step must lie in [1e-6, 1e-3]")

    gradient_j, gradient_c = finite_difference_gradients(mdp, policy, reference, alpha, fd_step)
    fisher = fisher_matrix(mdp, policy)
    singular = linalg.svdvals(fisher)
    positive = singular[singular > RANK_TOLERANCE * max(float(singular.max()), 1e-300)]
    rank = int(positive.size)
    expected_rank = mdp.n_states * (mdp.n_actions - 1)
    condition_number = float(positive.max() / positive.min()) if rank else float("inf")

    warning = None
    if rank < expected_rank:
        warning = f"Fisher matrix rank {rank} below {expected_rank}; condition number {condition_number:.9g}"
        logger.warning("Improvement condition: %s.", warning)

    inverse = linalg.pinv(fisher, rtol=RANK_TOLERANCE)
    lhs = max(float(gradient_j @ inverse @ gradient_j), 0.0)
    rhs = float(gradient_j @ inverse @ gradient_c)

    return ImprovementCondition(
        lhs=lhs,
        rhs=rhs,
        holds=lhs > rhs,
        rank=rank,
        expected_rank=expected_rank,
        condition_number=condition_number,
        warning=warning,
    )
