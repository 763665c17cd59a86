"""
Выборка переходов из моделей динамики и генерация синтетических траекторий.
"""

import logging
from typing import Optional

import numpy as np

from belief.services.posterior import sample_models
from belief.services.shemas import Belief
from dynamics.services.shemas import CategoricalModel, DynamicsModel, GaussianModel, ModelEnsemble, ModelKind
from mdp.services.features import FeatureMap
from mdp.services.policy import action_probabilities, sample_categorical_rows
from mdp.services.shemas import OfflineDataset, SeedLike, SoftPolicy, State, StateKind

logger = logging.getLogger()


def sample_next(
    model: DynamicsModel,
    state: State,
    action: int,
    rng_seed: SeedLike,
    features: Optional[FeatureMap] = None,
) -> tuple[State, float]:
    """
    Выборка следующего состояния и награды из одной модели.

    :param model: Модель динамики
    :param state: Состояние
    :param action: Действие
    :param rng_seed: Зерно или генератор
    :param features: Признаковое отображение (гауссова модель)
    :return:
    """

    rng = np.random.default_rng(rng_seed)
    if isinstance(model, CategoricalModel):
        next_state = int(rng.choice(model.n_states, p=model.probs[int(state), action]))  # type: ignore[arg-type]
        return next_state, float(model.reward_estimate[int(state), action])  # type: ignore[arg-type]

    if features is None:
        raise ValueError("gaussian model sampling requires a feature map")
    states = np.atleast_2d(np.asarray(state, dtype=np.float64))
    design = features.state_action(states, np.array([action]))
    output = model.sample(design, rng.standard_normal((1, model.state_dim + 1)))
    next_state = features.clip_states(output[:, : model.state_dim])[0]

    return tuple(float(value) for value in next_state), float(output[0, -1])


def _step_members(
    ensemble: ModelEnsemble,
    members: np.ndarray,
    states: np.ndarray,
    actions: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    next_states = np.empty_like(states)
    rewards = np.empty(states.shape[0])
    for member_index in np.unique(members):
        rows = np.flatnonzero(members == member_index)
        model = ensemble.members[member_index]
        if isinstance(model, GaussianModel):
            feature_map = ensemble.feature_map
            design = feature_map.state_action(states[rows], actions[rows])
            output = model.sample(design, rng.standard_normal((rows.size, model.state_dim + 1)))
            next_states[rows] = feature_map.clip_states(output[:, : model.state_dim])
            rewards[rows] = output[:, -1]
        else:
            indices = states[rows, 0].astype(np.int64)
            next_states[rows, 0] = sample_categorical_rows(model.probs[indices, actions[rows]], rng)
            rewards[rows] = model.reward_estimate[indices, actions[rows]]
    if ensemble.kind == ModelKind.GAUSSIAN:
        dones = ensemble.feature_map.is_terminal(next_states)
    else:
        dones = np.zeros(states.shape[0], dtype=bool)

    return next_states, rewards, dones


def generate_synthetic(
    ensemble: ModelEnsemble,
    belief: Belief,
    policy: SoftPolicy,
    start_states: np.ndarray,
    horizon: int,
    rng_seed: SeedLike,
    trace: Optional[list[tuple[int, int]]] = None,
) -> OfflineDataset:
    """
    Синтетические траектории: для каждого начального состояния одна модель выбирается из апостериорного
    распределения и фиксируется на всю траекторию длины ``horizon``; траектория обрывается на терминальном
    переходе.

    :param ensemble: Ансамбль
    :param belief: Распределение над моделями
    :param policy: Политика выбора действий
    :param start_states: Начальные состояния (индексы или матрица ``(n, d)``)
    :param horizon: Длина траектории
    :param rng_seed: Зерно или генератор
    :param trace: Список для пар ``(номер траектории, индекс модели)`` по каждому переходу
    :return: Набор переходов с пометкой ``synthetic``
    """

    if horizon < 1:
        raise ValueError("horizon must be at least 1")

    rng = np.random.default_rng(rng_seed)
    states = np.asarray(start_states, dtype=np.float64)
    states = states.reshape(-1, 1) if states.ndim == 1 else states.copy()
    members = sample_models(belief, states.shape[0], rng)
    alive = np.ones(states.shape[0], dtype=bool)
    feature_map = ensemble.feature_map
    discrete = ensemble.kind == ModelKind.CATEGORICAL

    columns: dict[str, list[np.ndarray]] = {"states": [], "actions": [], "rewards": [], "next_states": [], "dones": []}
    for _ in range(horizon):
        rollouts = np.flatnonzero(alive)
        if rollouts.size == 0:
            break
        current = states[rollouts]
        probs = action_probabilities(policy, current[:, 0] if discrete else current, features=feature_map)
        actions = sample_categorical_rows(probs, rng)
        next_states, rewards, dones = _step_members(ensemble, members[rollouts], current, actions, rng)
        if trace is not None:
            trace.extend(zip(rollouts.tolist(), members[rollouts].tolist()))

        for name, column in zip(columns, (current, actions, rewards, next_states, dones)):
            columns[name].append(column)
        states[rollouts] = next_states
        alive[rollouts] = ~dones

    size = sum(column.shape[0] for column in columns["actions"])
    width = states.shape[1]
    logger.debug("Generated %s synthetic transitions from %s rollouts.", size, states.shape[0])

    return OfflineDataset(
        kind=StateKind.DISCRETE if discrete else StateKind.CONTINUOUS,
        states=np.concatenate(columns["states"]) if size else np.empty((0, width)),
        actions=np.concatenate(columns["actions"]) if size else np.empty(0),
        rewards=np.concatenate(columns["rewards"]) if size else np.empty(0),
        next_states=np.concatenate(columns["next_states"]) if size else np.empty((0, width)),
        dones=np.concatenate(columns["dones"]) if size else np.empty(0),
        synthetic=np.ones(size, dtype=bool),
    )
