"""
Обучение моделей динамики методом максимального правдоподобия и формирование ансамбля.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from base.exceptions import DimensionMismatchError, TrainingDivergenceError
from dynamics.services.shemas import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    CategoricalModel,
    DynamicsModel,
    GaussianModel,
    ModelEnsemble,
    ModelKind,
)
from mdp.services.features import FeatureMap
from mdp.services.shemas import OfflineDataset, SeedLike

logger = logging.getLogger()

# допуск на рост NLL между эпохами
NLL_TOLERANCE = 1e-6
# шаг, при котором обновление log_std не перескакивает минимум
MAX_LEARNING_RATE = 0.5
VARIANCE_MIN = float(np.exp(2.0 * LOG_STD_MIN))


def _bootstrap_index(size: int, bootstrap_seed: Optional[SeedLike]) -> np.ndarray:
    if bootstrap_seed is None:
        return np.arange(size)

    return np.random.default_rng(bootstrap_seed).integers(0, size, size=size)


def fit_categorical(
    dataset: OfflineDataset,
    n_states: int,
    n_actions: int,
    smoothing: float,
    bootstrap_seed: Optional[SeedLike] = None,
) -> CategoricalModel:
    """
    Оценка табличной модели по счётчикам переходов.

    При заданном ``bootstrap_seed`` счётчики строятся по бутстреп-выборке того же размера.

    :param dataset: Набор переходов с дискретными состояниями
    :param n_states: Число состояний
    :param n_actions: Число действий
    :param smoothing: Псевдосчётчик
    :param bootstrap_seed: Зерно бутстрепа; ``None`` – без бутстрепа
    :return:
    """

    if len(dataset) == 0:
        raise ValueError("dataset must not be empty")
    states, actions, next_states = dataset.state_indices(), dataset.actions, dataset.next_state_indices()
    if (
        states.min() < 0
        or next_states.min() < 0
        or max(states.max(), next_states.max()) >= n_states
        or actions.min() < 0
        or actions.max() >= n_actions
    ):
        raise DimensionMismatchError("dataset indices are out of range for the given dimensions")

    index = _bootstrap_index(len(dataset), bootstrap_seed)
    counts = np.zeros((n_states, n_actions, n_states))
    np.add.at(counts, (states[index], actions[index], next_states[index]), 1.0)
    reward_sums = np.zeros((n_states, n_actions))
    np.add.at(reward_sums, (states[index], actions[index]), dataset.rewards[index])
    visits = counts.sum(axis=-1)
    reward_estimate = np.divide(reward_sums, visits, out=np.zeros_like(reward_sums), where=visits > 0)

    return CategoricalModel(
        counts=counts,
        smoothing=smoothing,
        reward_estimate=reward_estimate,
        seed=bootstrap_seed if isinstance(bootstrap_seed, int) else None,
    )


def gaussian_targets(dataset: OfflineDataset) -> np.ndarray:
    """
    Цели гауссовой модели: следующее состояние и награда.

    :param dataset: Набор переходов
    :return: Матрица ``(n, state_dim + 1)``
    """

    return np.column_stack([dataset.next_states, dataset.rewards])


def gaussian_nll(model: GaussianModel, features: np.ndarray, targets: np.ndarray) -> float:
    """
    Средний отрицательный логарифм правдоподобия.

    :param model: Модель
    :param features: Признаки ``(n, F)``
    :param targets: Цели ``(n, D)``
    :return:
    """

    variance = np.exp(2.0 * model.log_std)
    mse = ((features @ model.mean_weights - targets) ** 2).mean(axis=0)

    return float(np.sum(0.5 * np.log(2.0 * np.pi * variance) + mse / (2.0 * variance)))


class _SufficientStatistics:
    """
    Достаточные статистики линейной регрессии.

    MSE раскладывается как ``mse(w*) + (w - w*)^T X^T X (w - w*) / n`` вокруг решения наименьших квадратов
    ``w*``, остаток в ``w*`` считается по данным один раз.
    """

    def __init__(self, features: np.ndarray, targets: np.ndarray) -> None:
        self.size = features.shape[0]
        self.gram = features.T @ features
        self.cross = features.T @ targets
        self.pseudo_inverse = linalg.pinvh(self.gram)
        self.optimum = self.pseudo_inverse @ self.cross
        self.floor = ((features @ self.optimum - targets) ** 2).mean(axis=0)

    def mse(self, weights: np.ndarray) -> np.ndarray:
        deviation = weights - self.optimum

        return self.floor + np.einsum("fd,fg,gd->d", deviation, self.gram, deviation) / self.size

    def natural_gradient(self, weights: np.ndarray) -> np.ndarray:
        """
        Градиент NLL по весам, умноженный на обратную информацию Фишера.
        """

        return self.pseudo_inverse @ (self.gram @ weights - self.cross)


def _nll(log_std: np.ndarray, mse: np.ndarray) -> float:
    return float(np.sum(0.5 * np.log(2.0 * np.pi) + log_std + 0.5 * mse * np.exp(-2.0 * log_std)))


def _clip_log_std(variance: np.ndarray) -> np.ndarray:
    return np.clip(0.5 * np.log(np.maximum(variance, VARIANCE_MIN)), LOG_STD_MIN, LOG_STD_MAX)


def fit_gaussian(
    dataset: OfflineDataset,
    features: FeatureMap,
    epochs: int,
    learning_rate: float,
    bootstrap_seed: Optional[SeedLike] = None,
    init_seed: SeedLike = None,
) -> GaussianModel:
    """
    Обучение линейно-гауссовой модели градиентным спуском по NLL.

    Градиент по весам среднего предобуславливается информацией Фишера ``X^T X / (n v)``, так что шаг
    равен ``lr * pinv(X^T X) (X^T X w - X^T y)``; ``log_std`` обновляется обычным градиентом
    ``1 - mse / v``. Начальный ``log_std`` соответствует MSE начальных весов. При ``lr <= 1/2`` NLL
    не возрастает; рост NLL или неконечное значение считаются расхождением.

    :param dataset: Набор переходов с непрерывными состояниями
    :param features: Признаковое отображение пар состояние–действие
    :param epochs: Число эпох
    :param learning_rate: Шаг обучения
    :param bootstrap_seed: Зерно бутстрепа; ``None`` – без бутстрепа
    :param init_seed: Зерно начальной инициализации весов
    :return:
    """

    if len(dataset) == 0:
        raise ValueError("dataset must not be empty")
    if not 0.0 < learning_rate <= MAX_LEARNING_RATE:
        raise ValueError(f"learning_rate must be in (0, {MAX_LEARNING_RATE}]")

    index = _bootstrap_index(len(dataset), bootstrap_seed)
    sample = dataset.subset(index)
    design = features.state_action(sample.states, sample.actions)
    targets = gaussian_targets(sample)
    statistics = _SufficientStatistics(design, targets)

    weights = np.random.default_rng(init_seed).normal(scale=1e-2, size=(features.dim, targets.shape[1]))
    log_std = _clip_log_std(statistics.mse(weights))

    previous = _nll(log_std, statistics.mse(weights))
    for epoch in range(epochs):
        weights = weights - learning_rate * statistics.natural_gradient(weights)
        mse = statistics.mse(weights)
        log_std = np.clip(log_std - learning_rate * (1.0 - mse * np.exp(-2.0 * log_std)), LOG_STD_MIN, LOG_STD_MAX)
        current = _nll(log_std, mse)
        if not np.isfinite(current):
            raise TrainingDivergenceError(epoch)
        if current > previous + NLL_TOLERANCE * max(1.0, abs(previous)):
            raise TrainingDivergenceError(
                epoch, f"Negative log-likelihood increased at epoch {epoch}: {previous:.9g} -> {current:.9g}."
            )
        previous = current

    logger.debug("Gaussian model trained for %s epochs, NLL %.9g.", epochs, previous)

    return GaussianModel(
        mean_weights=weights,
        log_std=log_std,
        feature_map_id=features.feature_map_id,
        seed=init_seed if isinstance(init_seed, int) else None,
    )


def member_seeds(seed: int) -> tuple[int, int]:
    """
    Зёрна бутстрепа и инициализации для одной модели.

    :param seed: Зерно модели
    :return:
    """

    bootstrap, init = np.random.SeedSequence(seed).generate_state(2)

    return int(bootstrap), int(init)


def fit_ensemble(
    dataset: OfflineDataset,
    kind: ModelKind,
    seeds: Sequence[int],
    n_states: int = 0,
    n_actions: int = 0,
    smoothing: float = 1e-3,
    features: Optional[FeatureMap] = None,
    epochs: int = 1000,
    learning_rate: float = 1e-2,
) -> list[DynamicsModel]:
    """
    Обучение пула моделей, по одной на каждое зерно.

    :param dataset: Реальные переходы
    :param kind: Тип моделей
    :param seeds: Зёрна моделей
    :param n_states: Число состояний (табличный случай)
    :param n_actions: Число действий (табличный случай)
    :param smoothing: Псевдосчётчик (табличный случай)
    :param features: Признаковое отображение (непрерывный случай)
    :param epochs: Число эпох (непрерывный случай)
    :param learning_rate: Шаг обучения (непрерывный случай)
    :return:
    """

    real = dataset.real()
    models: list[DynamicsModel] = []
    for number, seed in enumerate(seeds):
        bootstrap_seed, init_seed = member_seeds(seed)
        if kind == ModelKind.CATEGORICAL:
            model = fit_categorical(real, n_states, n_actions, smoothing, bootstrap_seed)
            logger.info("Model %s fitted on %s transitions.", number, len(real))
        else:
            if features is None:
                raise DimensionMismatchError("gaussian models require a feature map")
            model = fit_gaussian(real, features, epochs, learning_rate, bootstrap_seed, init_seed)
            nll = gaussian_nll(model, features.state_action(real.states, real.actions), gaussian_targets(real))
            logger.info("Model %s final NLL: %.9g.", number, nll)
        models.append(model)

    return models


def draw_active(
    pool: Sequence[DynamicsModel],
    ensemble_size: int,
    rng_seed: SeedLike,
    features: Optional[FeatureMap] = None,
) -> ModelEnsemble:
    """
    Выбор активного ансамбля из пула без повторений.

    Если размер ансамбля равен размеру пула, пул не сохраняется отдельно.

    :param pool: Обученные модели
    :param ensemble_size: Размер ансамбля
    :param rng_seed: Зерно или генератор
    :param features: Признаковое отображение гауссовых моделей
    :return:
    """

    if not 1 <= ensemble_size <= len(pool):
        raise ValueError(f"ensemble size must lie in [1, {len(pool)}]")
    kind = ModelKind(pool[0].kind)
    if ensemble_size == len(pool):
        return ModelEnsemble(kind=kind, members=list(pool), feature_map=features)

    active = sorted(int(index) for index in np.random.default_rng(rng_seed).choice(len(pool), ensemble_size, False))

    return ModelEnsemble(
        kind=kind,
        members=[pool[index] for index in active],
        pool=list(pool),
        active_indices=active,
        feature_map=features,
    )
