"""
Точные оракулы оценки политики в конечном MDP.
"""

import numpy as np
from scipy import linalg

from base.exceptions import DimensionMismatchError
from mdp.services.divergence import kl_rows
from mdp.services.shemas import QFunction, Representation, SoftPolicy, TabularMdp


def _check_dimensions(mdp: TabularMdp, *policies: SoftPolicy) -> None:
    for policy in policies:
        if policy.representation != Representation.TABULAR:
            raise DimensionMismatchError("exact evaluation requires a tabular policy")
        if policy.probs.shape != (mdp.n_states, mdp.n_actions):
            raise DimensionMismatchError(
                f"policy shape {policy.probs.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
            )


def solve_q_values(transition: np.ndarray, reward: np.ndarray, gamma: float, probs: np.ndarray) -> np.ndarray:
    """
    Решение уравнения Беллмана ``Q = r + gamma T pi Q`` прямым методом.

    Сначала решается система размера ``S x S`` для ``V``, затем ``Q = r + gamma T V``.

    :param transition: Тензор переходов ``(S, A, S)``
    :param reward: Награды ``(S, A)``; могут зависеть от политики (штраф KL)
    :param gamma: Дисконт
    :param probs: Политика ``(S, A)``
    :return:
    """

    n_states = reward.shape[0]
    policy_transition = np.einsum("sa,sat->st", probs, transition)
    policy_reward = np.einsum("sa,sa->s", probs, reward)
    values = linalg.solve(np.eye(n_states) - gamma * policy_transition, policy_reward)

    return reward + gamma * transition @ values


def exact_policy_eval(mdp: TabularMdp, policy: SoftPolicy) -> QFunction:
    """
    Точная Q-функция политики.

    :param mdp: MDP
    :param policy: Табличная политика
    :return:
    """

    _check_dimensions(mdp, policy)

    return QFunction(values=solve_q_values(mdp.transition, mdp.reward, mdp.gamma, policy.probs))


def bellman_residual(mdp: TabularMdp, policy: SoftPolicy, q: QFunction) -> float:
    """
    Невязка уравнения Беллмана в max-норме.

    :param mdp: MDP
    :param policy: Политика
    :param q: Q-функция
    :return:
    """

    next_values = np.einsum("sa,sa->s", policy.probs, q.values)
    backup = mdp.reward + mdp.gamma * mdp.transition @ next_values

    return float(np.max(np.abs(backup - q.values)))


def expected_return(mdp: TabularMdp, policy: SoftPolicy) -> float:
    """
    Ожидаемая дисконтированная награда ``J(pi)`` при начальном распределении ``rho0``.

    :param mdp: MDP
    :param policy: Политика
    :return:
    """

    q_values = exact_policy_eval(mdp, policy).values

    return float(mdp.rho0 @ np.einsum("sa,sa->s", policy.probs, q_values))


def kl_penalized_reward(mdp: TabularMdp, policy: SoftPolicy, reference: SoftPolicy, alpha: float) -> np.ndarray:
    """
    Награда ``r(s,a) - alpha KL(pi(.|s) || mu(.|s))``. При ``alpha = 0`` KL не считается.

    :param mdp: MDP
    :param policy: Политика
    :param reference: Опорная политика
    :param alpha: Сила регуляризации
    :return:
    """

    _check_dimensions(mdp, policy, reference)
    if alpha == 0.0:
        return mdp.reward.copy()
    penalty = alpha * kl_rows(policy.probs, reference.probs)

    return mdp.reward - penalty[:, None]


def regularized_return(mdp: TabularMdp, policy: SoftPolicy, reference: SoftPolicy, alpha: float) -> float:
    """
    Регуляризованная цель ``J~(pi)``: ожидаемая награда MDP со штрафом KL к опорной политике.

    :param mdp: MDP
    :param policy: Политика
    :param reference: Опорная политика ``mu``
    :param alpha: Сила регуляризации, ``alpha >= 0``
    :return:
    """

    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    reward = kl_penalized_reward(mdp, policy, reference, alpha)
    q_values = solve_q_values(mdp.transition, reward, mdp.gamma, policy.probs)

    return float(mdp.rho0 @ np.einsum("sa,sa->s", policy.probs, q_values))


def discounted_occupancy(mdp: TabularMdp, policy: SoftPolicy) -> np.ndarray:
    """
    Нормированная дисконтированная частота посещения состояний ``(1 - gamma) rho0 (I - gamma T_pi)^-1``.

    :param mdp: MDP
    :param policy: Политика
    :return:
    """

    _check_dimensions(mdp, policy)
    policy_transition = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    occupancy = linalg.solve((np.eye(mdp.n_states) - mdp.gamma * policy_transition).T, mdp.rho0)

    return (1.0 - mdp.gamma) * occupancy
