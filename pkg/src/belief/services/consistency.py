"""
Оценка согласованности моделей динамики с реальными переходами по текущему критику.
"""

import logging
from typing import Optional

import numpy as np

from base.exceptions import DimensionMismatchError
from belief.services.shemas import ConsistencyScore
from dynamics.services.shemas import ModelEnsemble, ModelKind
from mdp.services.divergence import state_values
from mdp.services.policy import action_probabilities, q_values
from mdp.services.shemas import OfflineDataset, QFunction, SeedLike, SoftPolicy, ValueMode

logger = logging.getLogger()

# число выборок следующего состояния на переход для непрерывных моделей
DEFAULT_NEXT_STATE_SAMPLES = 8


def _check_batch(batch: OfflineDataset) -> None:
    if len(batch) == 0:
        raise ValueError("consistency batch must not be empty")
    if batch.synthetic.any():
        raise ValueError("consistency batch must contain only real transitions")


def _tabular_residuals(
    batch: OfflineDataset,
    q: QFunction,
    policy: SoftPolicy,
    reference: SoftPolicy,
    ensemble: ModelEnsemble,
    alpha: float,
    gamma: float,
    mode: ValueMode,
) -> np.ndarray:
    values = state_values(q.values, policy.probs, reference.probs, alpha, mode)
    states, actions = batch.state_indices(), batch.actions
    # ожидание V(s') по каждой модели: (N, n)
    expected_next = ensemble.transition_tensor()[:, states, actions, :] @ values
    targets = batch.rewards + gamma * (1.0 - batch.dones) * expected_next

    return q.values[states, actions][None, :] - targets


def _continuous_residuals(
    batch: OfflineDataset,
    q: QFunction,
    policy: SoftPolicy,
    reference: SoftPolicy,
    ensemble: ModelEnsemble,
    alpha: float,
    gamma: float,
    mode: ValueMode,
    n_samples: int,
    rng_seed: SeedLike,
) -> np.ndarray:
    feature_map = ensemble.feature_map
    rng = np.random.default_rng(rng_seed)
    features = feature_map.state_action(batch.states, batch.actions)
    current = features @ q.weights
    # общий шум для всех моделей: различия оценок вызваны только моделями
    noise = rng.standard_normal((len(batch), n_samples, batch.state_dim + 1))
    reference_probs = np.exp(reference.reference_log_probs)

    residuals = []
    for member in ensemble.members:
        samples = member.sample(features, noise)[:, :, : batch.state_dim]
        next_states = feature_map.clip_states(samples.reshape(-1, batch.state_dim))
        next_features = feature_map.all_actions(next_states)
        next_q = q_values(q, next_states, action_features=next_features)
        next_probs = action_probabilities(policy, next_states, action_features=next_features)
        values = state_values(next_q, next_probs, reference_probs, alpha, mode).reshape(len(batch), n_samples)
        targets = batch.rewards + gamma * (1.0 - batch.dones) * values.mean(axis=1)
        residuals.append(current - targets)

    return np.stack(residuals)


def consistency_scores(
    batch: OfflineDataset,
    q: QFunction,
    policy: SoftPolicy,
    ensemble: ModelEnsemble,
    alpha: float,
    gamma: float,
    reference: Optional[SoftPolicy] = None,
    mode: ValueMode = ValueMode.OPTIMALITY,
    n_samples: int = DEFAULT_NEXT_STATE_SAMPLES,
    rng_seed: SeedLike = 0,
) -> ConsistencyScore:
    """
    Средние квадраты TD-невязок ``|Q(s,a) - (r + gamma E_{s'~T_i} V(s'))|^2`` для всех моделей ансамбля.

    Для табличных моделей ожидание считается точно, для гауссовых – по ``n_samples`` выборкам
    следующего состояния на переход.

    :param batch: Реальные переходы
    :param q: Текущий критик
    :param policy: Текущая политика (для режимов оценки по политике)
    :param ensemble: Ансамбль
    :param alpha: Сила регуляризации
    :param gamma: Дисконт
    :param reference: Опорная политика; по умолчанию ``policy``
    :param mode: Способ получения ценности состояния
    :param n_samples: Число выборок следующего состояния (непрерывный случай)
    :param rng_seed: Зерно или генератор
    :return:
    """

    _check_batch(batch)
    reference = policy if reference is None else reference
    if ensemble.kind == ModelKind.CATEGORICAL:
        residuals = _tabular_residuals(batch, q, policy, reference, ensemble, alpha, gamma, mode)
    else:
        residuals = _continuous_residuals(
            batch, q, policy, reference, ensemble, alpha, gamma, mode, n_samples, rng_seed
        )

    return ConsistencyScore(scores=(residuals**2).mean(axis=1))


def consistency_metric(
    model_index: int,
    batch: OfflineDataset,
    q: QFunction,
    policy: SoftPolicy,
    ensemble: ModelEnsemble,
    alpha: float,
    gamma: float,
    **options: object,
) -> float:
    """
    Оценка согласованности одной модели ансамбля.

    :param model_index: Индекс модели
    :param batch: Реальные переходы
    :param q: Текущий критик
    :param policy: Текущая политика
    :param ensemble: Ансамбль
    :param alpha: Сила регуляризации
    :param gamma: Дисконт
    :param options: Параметры :func:`consistency_scores`
    :return:
    """

    if not 0 <= model_index < ensemble.size:
        raise DimensionMismatchError(f"model index {model_index} out of range for {ensemble.size} models")
    single = ensemble.copy(update={"members": [ensemble.members[model_index]], "pool": None, "active_indices": None})

    scores = consistency_scores(batch, q, policy, single, alpha, gamma, **options)  # type: ignore[arg-type]

    return float(scores.scores[0])
