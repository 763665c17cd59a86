"""
Улучшение политики: экспоненциальный наклон опорной политики по Q и шаг с ограничением KL к текущей политике.

Решение задачи ``max E_pi Q - alpha KL(pi || mu) - lambda KL(pi || pi_i)`` при фиксированном ``lambda``:
``log pi ∝ (alpha log mu + lambda log pi_i + Q) / (alpha + lambda)``. Множитель ``lambda`` подбирается
бисекцией: KL нового шага к текущей политике не возрастает по ``lambda``.
"""

import logging
from typing import Callable, Optional

import numpy as np
from scipy.special import log_softmax, softmax

from base.exceptions import BisectionError, DimensionMismatchError
from mdp.services.divergence import kl_rows
from mdp.services.shemas import QFunction, Representation, SoftPolicy
from pspo.services.shemas import TrustRegionAggregation

logger = logging.getLogger()

MAX_DOUBLINGS = 200
MAX_BISECTIONS = 200
# допуск «плотности» ограничения на найденном lambda
BISECTION_TOLERANCE = 1e-6


def _log(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(probs)


def tilted_log_probs(
    q_rows: np.ndarray,
    log_reference: np.ndarray,
    alpha: float,
    log_current: Optional[np.ndarray] = None,
    lam: float = 0.0,
) -> np.ndarray:
    """
    Нормированные логарифмы ``(alpha log mu + lambda log pi_i + Q) / (alpha + lambda)``.

    При ``lambda = 0`` текущая политика не участвует, при ``alpha = 0`` не участвует ``mu``
    (остаётся наклон ``pi ∝ pi_i exp(Q / lambda)``, требующий ``lambda > 0``).

    :param q_rows: Значения Q ``(n, A)``
    :param log_reference: ``log mu`` формы ``(n, A)`` или ``(A,)``
    :param alpha: Сила регуляризации
    :param log_current: ``log pi_i`` формы ``(n, A)``
    :param lam: Множитель ``lambda >= 0``
    :return:
    """

    logits = q_rows if alpha == 0.0 else alpha * np.broadcast_to(log_reference, q_rows.shape) + q_rows
    if lam > 0.0:
        logits = logits + lam * log_current

    return log_softmax(logits / (alpha + lam), axis=-1)


def closed_form_optimal_policy(q_star: QFunction, reference: SoftPolicy, alpha: float) -> SoftPolicy:
    """
    ``pi*(a|s) ∝ mu(a|s) exp(Q*(s,a) / alpha)`` с вычитанием максимума по строке.

    :param q_star: Табличная Q-функция
    :param reference: Опорная политика ``mu``
    :param alpha: Сила регуляризации
    :return:
    """

    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if q_star.values.shape != reference.probs.shape:
        raise DimensionMismatchError(f"Q shape {q_star.values.shape} does not match policy {reference.probs.shape}")

    return SoftPolicy(probs=np.exp(tilted_log_probs(q_star.values, _log(reference.probs), alpha)))


def aggregate_divergence(
    divergence: np.ndarray, aggregation: TrustRegionAggregation, weights: Optional[np.ndarray] = None
) -> float:
    """
    KL по состояниям, сведённая к одному числу: максимум или среднее (взвешенное, если заданы веса).

    :param divergence: KL для каждого состояния
    :param aggregation: Способ свёртки
    :param weights: Веса состояний
    :return:
    """

    if aggregation == TrustRegionAggregation.MAX:
        return float(divergence.max())
    if weights is None:
        return float(divergence.mean())

    return float(weights @ divergence / weights.sum())


def search_lambda(divergence: Callable[[float], float], alpha: float, epsilon: float) -> float:
    """
    Наименьший (с точностью бисекции) ``lambda >= 0``, при котором ``divergence(lambda) <= epsilon``.

    Правая граница начинается с ``alpha`` (с единицы при ``alpha = 0``) и удваивается, затем отрезок делится
    пополам. Возвращается правая граница, поэтому ограничение всегда выполнено. При ``alpha = 0`` шаг
    с ``lambda = 0`` не определён и не рассматривается.

    :param divergence: KL шага как функция ``lambda``
    :param alpha: Сила регуляризации (начальная правая граница)
    :param epsilon: Радиус доверительной области
    :return:
    """

    if alpha > 0.0 and divergence(0.0) <= epsilon:
        return 0.0

    lower, upper = 0.0, alpha if alpha > 0.0 else 1.0
    for _ in range(MAX_DOUBLINGS):
        if divergence(upper) <= epsilon:
            break
        lower, upper = upper, 2.0 * upper
    else:
        raise BisectionError(lower, upper, divergence(lower), divergence(upper), epsilon)

    for _ in range(MAX_BISECTIONS):
        if epsilon - divergence(upper) <= BISECTION_TOLERANCE:
            return upper
        middle = 0.5 * (lower + upper)
        if middle in (lower, upper):
            return upper
        if divergence(middle) <= epsilon:
            upper = middle
        else:
            lower = middle

    kl_lower = divergence(lower) if alpha + lower > 0.0 else np.inf

    raise BisectionError(lower, upper, kl_lower, divergence(upper), epsilon)


def constrained_improvement_step(
    q: QFunction,
    current: SoftPolicy,
    reference: SoftPolicy,
    alpha: float,
    epsilon_trust: float,
    aggregation: TrustRegionAggregation = TrustRegionAggregation.MAX,
    weights: Optional[np.ndarray] = None,
) -> tuple[SoftPolicy, float]:
    """
    ``pi_{i+1} ∝ mu^{alpha/(alpha+lambda)} pi_i^{lambda/(alpha+lambda)} exp(Q / (alpha + lambda))``.

    :param q: Табличная Q-функция
    :param current: Текущая политика ``pi_i``
    :param reference: Опорная политика ``mu``
    :param alpha: Сила регуляризации
    :param epsilon_trust: Радиус доверительной области
    :param aggregation: Агрегирование KL по состояниям
    :param weights: Веса состояний для среднего (по умолчанию равные)
    :return: Новая политика и использованный ``lambda``
    """

    if epsilon_trust <= 0.0:
        raise ValueError("epsilon_trust must be positive")
    if not q.values.shape == current.probs.shape == reference.probs.shape:
        raise DimensionMismatchError("Q-function, current and reference policies must have the same shape")

    log_reference, log_current = _log(reference.probs), _log(current.probs)

    def step(lam: float) -> np.ndarray:
        return np.exp(tilted_log_probs(q.values, log_reference, alpha, log_current, lam))

    def divergence(lam: float) -> float:
        return aggregate_divergence(kl_rows(step(lam), current.probs), aggregation, weights)

    lam = search_lambda(divergence, alpha, epsilon_trust)
    logger.debug("Trust-region step with lambda=%.9g.", lam)

    return SoftPolicy(probs=step(lam)), lam


def linear_improvement_step(
    critic_weights: np.ndarray,
    current: SoftPolicy,
    action_features: np.ndarray,
    alpha: float,
    epsilon_trust: float,
    aggregation: TrustRegionAggregation = TrustRegionAggregation.MAX,
) -> tuple[SoftPolicy, float]:
    """
    Шаг с ограничением KL в семействе ``log pi ∝ kappa log mu + theta . psi``.

    Для линейного критика ``Q = w . psi`` решение остаётся в семействе:
    ``kappa' = (alpha + lambda kappa) / (alpha + lambda)``, ``theta' = (lambda theta + w) / (alpha + lambda)``.
    Ограничение проверяется на состояниях, для которых посчитаны ``action_features``.

    :param critic_weights: Веса критика ``w``
    :param current: Текущая линейная политика
    :param action_features: Признаки ``(n, A, F)`` состояний пакета
    :param alpha: Сила регуляризации
    :param epsilon_trust: Радиус доверительной области
    :param aggregation: Агрегирование KL по состояниям
    :return: Новая политика и использованный ``lambda``
    """

    if current.representation != Representation.LINEAR:
        raise DimensionMismatchError("linear improvement requires a linear policy")
    if critic_weights.shape != current.theta.shape:
        raise DimensionMismatchError(f"critic weights {critic_weights.shape} do not match theta {current.theta.shape}")

    log_reference = current.reference_log_probs
    current_logits = current.kappa * log_reference[None, :] + action_features @ current.theta
    current_probs = softmax(current_logits, axis=-1)
    q_rows = action_features @ critic_weights

    def parameters(lam: float) -> tuple[float, np.ndarray]:
        return (alpha + lam * current.kappa) / (alpha + lam), (lam * current.theta + critic_weights) / (alpha + lam)

    def divergence(lam: float) -> float:
        probs = np.exp(tilted_log_probs(q_rows, log_reference, alpha, log_softmax(current_logits, axis=-1), lam))
        return aggregate_divergence(kl_rows(probs, current_probs), aggregation, None)

    lam = search_lambda(divergence, alpha, epsilon_trust)
    kappa, theta = parameters(lam)

    policy = SoftPolicy(
        representation=Representation.LINEAR,
        kappa=float(kappa),
        theta=theta,
        reference_log_probs=log_reference,
        feature_map_id=current.feature_map_id,
    )

    return policy, lam
