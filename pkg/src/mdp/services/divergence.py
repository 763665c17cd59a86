"""
Мягкая ценность состояния и KL-дивергенция между категориальными распределениями.
"""

import numpy as np
from scipy.special import logsumexp, rel_entr

from base.exceptions import DimensionMismatchError, InfiniteDivergenceError
from mdp.services.shemas import QFunction, Representation, SoftPolicy, ValueMode


def soft_value_rows(q_rows: np.ndarray, reference_probs: np.ndarray, alpha: float) -> np.ndarray:
    """
    Мягкая ценность ``alpha * log sum_a mu(a|s) exp(Q(s,a) / alpha)`` для набора строк.

    Логарифм суммы экспонент считается с вычитанием максимума по носителю ``mu``.

    :param q_rows: Значения Q формы ``(n, A)``
    :param reference_probs: Опорная политика формы ``(n, A)`` или ``(A,)``
    :param alpha: Сила регуляризации, ``alpha > 0``
    :return: Вектор формы ``(n,)``
    """

    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    weights = np.broadcast_to(reference_probs, q_rows.shape)

    return alpha * logsumexp(q_rows / alpha, axis=-1, b=weights)


def soft_value(q: QFunction, reference: SoftPolicy, alpha: float, state: int) -> float:
    """
    Мягкая ценность состояния для табличной Q-функции.

    :param q: Q-функция
    :param reference: Опорная политика ``mu``
    :param alpha: Сила регуляризации
    :param state: Индекс состояния
    :return:
    """

    if q.representation != Representation.TABULAR or reference.representation != Representation.TABULAR:
        raise DimensionMismatchError("soft_value expects tabular Q-function and reference policy")
    if q.values.shape != reference.probs.shape:
        raise DimensionMismatchError(f"Q shape {q.values.shape} does not match policy shape {reference.probs.shape}")

    return float(soft_value_rows(q.values[state][None, :], reference.probs[state], alpha)[0])


def kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """
    Построчная дивергенция ``KL(p || q)`` в натуральных логарифмах; ``0 log 0 = 0``.

    :param p: Распределения формы ``(n, A)``
    :param q: Распределения формы ``(n, A)``
    :return:
    """

    divergence = rel_entr(p, q).sum(axis=-1)
    if np.any(np.isinf(divergence)):
        raise InfiniteDivergenceError("reference distribution is zero where the policy is positive")

    return np.maximum(divergence, 0.0)


def kl_divergence(p: SoftPolicy, q: SoftPolicy, state: int) -> float:
    """
    ``KL(p(.|s) || q(.|s))`` для табличных политик.

    :param p: Политика
    :param q: Опорная политика
    :param state: Индекс состояния
    :return:
    """

    if p.probs.shape != q.probs.shape:
        raise DimensionMismatchError(f"policy shapes differ: {p.probs.shape} and {q.probs.shape}")

    return float(kl_rows(p.probs[state][None, :], q.probs[state][None, :])[0])


def state_values(
    q_rows: np.ndarray,
    policy_probs: np.ndarray,
    reference_probs: np.ndarray,
    alpha: float,
    mode: ValueMode,
) -> np.ndarray:
    """
    Ценности состояний по строкам Q для выбранного способа оценки.

    :param q_rows: Значения Q формы ``(n, A)``
    :param policy_probs: Текущая политика ``(n, A)``
    :param reference_probs: Опорная политика ``(n, A)`` или ``(A,)``
    :param alpha: Сила регуляризации
    :param mode: Способ оценки
    :return: Вектор формы ``(n,)``
    """

    if mode == ValueMode.OPTIMALITY:
        return soft_value_rows(q_rows, reference_probs, alpha)

    values = np.einsum("na,na->n", policy_probs, q_rows)
    if mode == ValueMode.REGULARIZED_POLICY:
        values = values - alpha * kl_rows(policy_probs, np.broadcast_to(reference_probs, policy_probs.shape))

    return values
