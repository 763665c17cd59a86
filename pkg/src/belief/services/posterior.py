"""
Апостериорное распределение над ансамблем моделей: обновление по принципу минимума информации,
выборка моделей, предсказательное распределение и мера неопределённости.
"""

import logging
from typing import Optional

import numpy as np
from scipy.special import rel_entr

from base.exceptions import DimensionMismatchError, NormalizationError, UnsupportedOperationError
from belief.services.shemas import Belief, ConsistencyScore
from dynamics.services.shemas import ModelEnsemble, ModelKind
from mdp.services.shemas import OfflineDataset, SeedLike, TabularMdp

logger = logging.getLogger()

# нижняя граница стандартного отклонения в мере неопределённости
UNCERTAINTY_FLOOR = 1e-12
# ограничение полного перебора по сетке симплекса
BRUTE_FORCE_MAX_MODELS = 4


def _normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    finite = np.isfinite(log_weights)
    if not finite.any():
        raise NormalizationError("all posterior weights vanished")
    shifted = np.where(finite, np.exp(log_weights - log_weights[finite].max()), 0.0)

    return shifted / shifted.sum()


def _log_prior(prior: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(prior)


def posterior_update(belief: Belief, scores: ConsistencyScore) -> Belief:
    """
    Обобщённое байесовское обновление ``posterior ∝ prior * exp(-beta * F)``.

    Оценки центрируются по минимуму на носителе априорного распределения до возведения в экспоненту.
    Апостериорное распределение всегда пересчитывается от априорного.

    :param belief: Текущее распределение
    :param scores: Оценки согласованности моделей
    :return:
    """

    if scores.size != belief.size:
        raise DimensionMismatchError(f"{scores.size} scores for {belief.size} models")

    support = belief.prior > 0.0
    centered = scores.scores - scores.scores[support].min()
    posterior = _normalize_log_weights(_log_prior(belief.prior) - belief.beta * centered)

    return belief.with_posterior(posterior, iteration=belief.iteration + 1)


def _compositions(n_parts: int, total: int) -> np.ndarray:
    # все целочисленные точки n_parts-мерного симплекса с суммой total
    if n_parts == 1:
        return np.array([[total]])
    if n_parts == 2:
        first = np.arange(total + 1)
        return np.stack([first, total - first], axis=1)
    first, second = np.nonzero(np.add.outer(np.arange(total + 1), np.arange(total + 1)) <= total)
    return np.stack([first, second, total - first - second], axis=1)


def _objective(points: np.ndarray, prior: np.ndarray, beta: float, scores: np.ndarray) -> np.ndarray:
    return rel_entr(points, prior[None, :]).sum(axis=1) + beta * points @ scores


def posterior_brute_force(belief: Belief, scores: ConsistencyScore, grid_step: float) -> np.ndarray:
    """
    Прямая минимизация ``KL(P || prior) + beta * E_P[F]`` перебором по сетке симплекса.

    :param belief: Распределение (используются ``prior`` и ``beta``)
    :param scores: Оценки согласованности
    :param grid_step: Шаг сетки в ``(0, 0.1]``
    :return: Точка сетки с наименьшим значением цели
    """

    if belief.size > BRUTE_FORCE_MAX_MODELS:
        raise UnsupportedOperationError(f"grid search supports at most {BRUTE_FORCE_MAX_MODELS} models")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")
    if scores.size != belief.size:
        raise DimensionMismatchError(f"{scores.size} scores for {belief.size} models")

    total = int(round(1.0 / grid_step))
    best_point, best_value = None, np.inf
    # для четырёх моделей первая координата перебирается в цикле, остальные векторно
    heads = range(total + 1) if belief.size == BRUTE_FORCE_MAX_MODELS else [None]
    for head in heads:
        if head is None:
            points = _compositions(belief.size, total)
        else:
            rest = _compositions(belief.size - 1, total - head)
            points = np.column_stack([np.full(rest.shape[0], head), rest])
        weights = points / total
        values = _objective(weights, belief.prior, belief.beta, scores.scores)
        index = int(np.argmin(values))
        if values[index] < best_value:
            best_point, best_value = weights[index], values[index]

    return best_point


def sample_model(belief: Belief, rng_seed: SeedLike) -> int:
    """
    Выбор индекса модели из апостериорного распределения.

    :param belief: Распределение
    :param rng_seed: Зерно или генератор
    :return:
    """

    return int(sample_models(belief, 1, rng_seed)[0])


def sample_models(belief: Belief, size: int, rng_seed: SeedLike) -> np.ndarray:
    """
    Векторизованный выбор ``size`` индексов моделей.

    :param belief: Распределение
    :param size: Число выборок
    :param rng_seed: Зерно или генератор
    :return:
    """

    rng = np.random.default_rng(rng_seed)
    cumulative = np.cumsum(belief.posterior)
    draws = rng.random(size) * cumulative[-1]

    return np.minimum(np.searchsorted(cumulative, draws, side="right"), belief.size - 1)


def _require_categorical(ensemble: ModelEnsemble, operation: str) -> None:
    if ensemble.kind != ModelKind.CATEGORICAL:
        raise UnsupportedOperationError(f"{operation} requires categorical models; sample gaussian models instead")


def posterior_predictive(belief: Belief, ensemble: ModelEnsemble, state: int, action: int) -> np.ndarray:
    """
    Предсказательное распределение следующего состояния ``sum_i w_i T_i(.|s, a)``.

    :param belief: Распределение
    :param ensemble: Ансамбль категориальных моделей
    :param state: Состояние
    :param action: Действие
    :return:
    """

    _require_categorical(ensemble, "posterior_predictive")
    rows = np.stack([member.probs[state, action] for member in ensemble.members])

    return belief.posterior @ rows


def mixture_kernel(belief: Belief, ensemble: ModelEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """
    Смесь ядер ``sum_i w_i T_i`` и наград ``sum_i w_i r_i`` по апостериорным весам.

    :param belief: Распределение
    :param ensemble: Ансамбль категориальных моделей
    :return: Переходы ``(S, A, S)`` и награды ``(S, A)``
    """

    _require_categorical(ensemble, "mixture_kernel")
    if belief.size != ensemble.size:
        raise DimensionMismatchError(f"belief over {belief.size} models for an ensemble of {ensemble.size}")
    transition = np.einsum("i,isat->sat", belief.posterior, ensemble.transition_tensor())
    reward = np.einsum("i,isa->sa", belief.posterior, ensemble.reward_tensor())

    return transition / transition.sum(axis=-1, keepdims=True), reward


def mixture_mdp(belief: Belief, ensemble: ModelEnsemble, gamma: float, rho0: np.ndarray, r_max: float) -> TabularMdp:
    """
    MDP со смесью ядер и наград ансамбля.

    Пошаговая выборка модели из фиксированного распределения эквивалентна переходу по смеси.

    :param belief: Распределение
    :param ensemble: Ансамбль категориальных моделей
    :param gamma: Дисконт
    :param rho0: Начальное распределение
    :param r_max: Граница наград
    :return:
    """

    transition, reward = mixture_kernel(belief, ensemble)

    return TabularMdp(
        n_states=ensemble.n_states,
        n_actions=ensemble.n_actions,
        transition=transition,
        reward=np.clip(reward, -r_max, r_max),
        gamma=gamma,
        rho0=rho0,
        r_max=r_max,
    )


def predicted_means(ensemble: ModelEnsemble, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """
    Предсказанные средние следующего состояния каждой моделью.

    Для категориальных моделей среднее берётся в унитарном кодировании (строка вероятностей).

    :param ensemble: Ансамбль
    :param states: Состояния (индексы или матрица)
    :param actions: Действия
    :return: Тензор ``(N, n, d)``
    """

    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    if ensemble.kind == ModelKind.CATEGORICAL:
        indices = np.asarray(states, dtype=np.int64).reshape(-1)
        return ensemble.transition_tensor()[:, indices, actions, :]

    features = ensemble.feature_map.state_action(np.atleast_2d(states), actions)

    return np.stack([member.predict(features)[:, : member.state_dim] for member in ensemble.members])


def uncertainty_metric(
    ensemble: ModelEnsemble,
    belief: Belief,
    states: np.ndarray,
    actions: np.ndarray,
    n_model_samples: Optional[int] = None,
    rng_seed: SeedLike = None,
) -> np.ndarray:
    """
    Логарифм разброса предсказанных средних следующего состояния между моделями из апостериорного распределения.

    Стандартное отклонение берётся по моделям для каждой компоненты состояния, затем усредняется
    по компонентам; результат ограничен снизу значением ``log(1e-12)``. При ``n_model_samples=None``
    используется точный перебор всех моделей с весами апостериорного распределения.

    :param ensemble: Ансамбль
    :param belief: Распределение
    :param states: Состояния
    :param actions: Действия
    :param n_model_samples: Число выбираемых моделей (не меньше 2) или ``None``
    :param rng_seed: Зерно или генератор
    :return: Вектор по парам ``(state, action)``
    """

    means = predicted_means(ensemble, states, actions)
    if n_model_samples is None:
        weights = belief.posterior[:, None, None]
        center = (weights * means).sum(axis=0)
        spread = np.sqrt((weights * (means - center) ** 2).sum(axis=0))
    else:
        if n_model_samples < 2:
            raise ValueError("n_model_samples must be at least 2")
        drawn = sample_models(belief, n_model_samples, rng_seed)
        spread = means[drawn].std(axis=0)

    return np.log(np.maximum(spread.mean(axis=-1), UNCERTAINTY_FLOOR))


def bayes_filter_update(belief: Belief, ensemble: ModelEnsemble, dataset: OfflineDataset) -> Belief:
    """
    Классический байесовский фильтр ``b'(i) ∝ b(i) * T_i(s'|s, a)`` по всем переходам набора.

    :param belief: Текущее распределение
    :param ensemble: Ансамбль категориальных моделей
    :param dataset: Наблюдённые переходы
    :return:
    """

    _require_categorical(ensemble, "bayes_filter_update")
    transitions = ensemble.transition_tensor()
    likelihood = transitions[:, dataset.state_indices(), dataset.actions, dataset.next_state_indices()]
    with np.errstate(divide="ignore"):
        log_likelihood = np.log(likelihood).sum(axis=1)
    posterior = _normalize_log_weights(_log_prior(belief.posterior) + log_likelihood)
    logger.debug("Bayes filter applied to %s transitions.", len(dataset))

    return belief.with_posterior(posterior, iteration=belief.iteration + 1)
