"""
Цикл обучения: ансамбль моделей, апостериорное распределение, оценка политики, улучшение с ограничением KL
и скользящее среднее целевых сетей.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.stats import spearmanr

from base.clients.shemas import ArrayModel
from base.exceptions import ConfigurationError, IterationError, PspoError
from belief.services.consistency import consistency_scores
from belief.services.posterior import (
    bayes_filter_update,
    mixture_mdp,
    posterior_update,
    sample_models,
    uncertainty_metric,
)
from belief.services.shemas import Belief
from dynamics.services.fitting import draw_active, fit_ensemble
from dynamics.services.rollout import generate_synthetic
from dynamics.services.shemas import ModelEnsemble, ModelKind
from mdp.services.divergence import kl_rows, state_values
from mdp.services.evaluation import discounted_occupancy, expected_return, regularized_return
from mdp.services.features import FeatureMap
from mdp.services.generator import behavior_frequencies
from mdp.services.policy import action_probabilities
from mdp.services.shemas import (
    OfflineDataset,
    QFunction,
    Representation,
    SoftPolicy,
    StateKind,
    TabularMdp,
    ValueMode,
)
from pspo.services.diagnostics import ImprovementCondition, improvement_condition_check
from pspo.services.improvement import aggregate_divergence, constrained_improvement_step, linear_improvement_step
from pspo.services.operators import OperatorContext, OperatorTag, exact_fixed_point
from pspo.services.shemas import (
    BeliefRule,
    EvaluationSolver,
    IterationReport,
    PspoConfig,
    TrustRegionAggregation,
)
from pspo.services.stochastic import (
    VarianceCheck,
    sample_targets,
    stochastic_q_update,
    value_bound,
    variance_bound_check,
)

logger = logging.getLogger()

# потоки случайных чисел, производные от зерна обучения
DYNAMICS_STREAM = 1
ACTIVE_STREAM = 2
TRAINING_STREAM = 3

# допуск проверок монотонности и доверительной области в отчётах
MONOTONIC_TOLERANCE = 1e-8
TRUST_REGION_TOLERANCE = 1e-6
# сколько последних пар (неопределённость, TD-цель) хранится для диагностики
UNCERTAINTY_SAMPLE_LIMIT = 10_000


class TrainingResult(ArrayModel):
    """
    Итог обучения: текущие и целевые политика и критик, ансамбль, распределение над моделями и отчёты.

    ``uncertainty_samples`` – пары (неопределённость модели, TD-цель) последних итераций непрерывного трека,
    не больше ``UNCERTAINTY_SAMPLE_LIMIT``.
    """

    policy: SoftPolicy
    q: QFunction
    target_policy: SoftPolicy
    target_q: QFunction
    belief: Belief
    ensemble: ModelEnsemble
    reports: list[IterationReport]
    uncertainty_samples: list[tuple[float, float]] = []

    @property
    def condition_failures(self) -> int:
        """
        Число итераций, на которых условие монотонного улучшения не выполнено.
        """

        return sum(1 for report in self.reports if report.condition_holds is False)

    @property
    def monotonic_violations(self) -> int:
        """
        Число итераций, где условие выполнено, а ``J`` на смеси моделей уменьшилась.
        """

        return sum(1 for report in self.reports if report.condition_holds and report.monotonic is False)


def _seed_stream(seed: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, stream])


def _variance(targets: np.ndarray, r_max: float, gamma: float) -> VarianceCheck:
    if targets.size < 2:
        return VarianceCheck(variance=0.0, bound=value_bound(r_max, gamma) ** 2, passed=True)

    return variance_bound_check(targets, r_max, gamma)


class BaseTrainer(ABC):
    """
    Общая часть цикла: выборка пакетов, обновление распределения над моделями, синтетические данные
    и запись отчётов. Наследники реализуют оценку и улучшение для своего представления.
    """

    model_kind: ModelKind

    def __init__(
        self,
        dataset: OfflineDataset,
        config: PspoConfig,
        seed: int,
        r_max: float,
        ensemble: Optional[ModelEnsemble] = None,
    ) -> None:
        self.real = dataset.real()
        if len(self.real) == 0:
            raise ValueError("training dataset must contain real transitions")
        self.config = config
        self.seed = seed
        self.r_max = r_max
        self.alpha = config.effective_alpha
        self.improvement_alpha = config.improvement_alpha
        self.mode = config.evaluation_mode
        self.rng = np.random.default_rng(_seed_stream(seed, TRAINING_STREAM))
        self.ensemble = self.fit_dynamics() if ensemble is None else ensemble
        if self.ensemble.kind != self.model_kind:
            raise ConfigurationError(f"{type(self).__name__} requires {self.model_kind.value} models")
        self.belief = Belief.uniform(self.ensemble.size, beta=config.beta)
        self.uncertainty_samples: list[tuple[float, float]] = []

    def member_seeds(self) -> list[int]:
        state = _seed_stream(self.seed, DYNAMICS_STREAM).generate_state(self.config.model_pool_size)

        return [int(value) for value in state]

    def active_seed(self) -> np.random.SeedSequence:
        return _seed_stream(self.seed, ACTIVE_STREAM)

    @abstractmethod
    def fit_dynamics(self) -> ModelEnsemble:
        """
        Обучение пула моделей и выбор активного ансамбля.

        :return:
        """

    @abstractmethod
    def iteration(self, iteration: int) -> IterationReport:
        """
        Одна итерация обучения.

        :param iteration: Номер итерации
        :return:
        """

    @abstractmethod
    def result(self, reports: list[IterationReport]) -> TrainingResult:
        """
        Итог обучения.

        :param reports: Отчёты итераций
        :return:
        """

    def train(self, callback: Optional[Callable[[IterationReport], None]] = None) -> TrainingResult:
        """
        Ровно ``iterations`` итераций; ошибка внутри итерации прерывает обучение с её номером.

        :param callback: Вызывается с отчётом после каждой итерации
        :return:
        """

        iterations = self.config.iterations
        every = max(1, iterations // 10)
        reports = []
        for iteration in range(iterations):
            try:
                report = self.iteration(iteration)
            except (PspoError, ValueError, ArithmeticError) as error:
                logger.error("Iteration %s failed.", iteration, exc_info=True)
                raise IterationError(iteration, error) from error
            reports.append(report)
            if callback is not None:
                callback(report)
            if (iteration + 1) % every == 0 or iteration + 1 == iterations:
                logger.info(
                    "Iteration %s/%s: regularized return %.9g, KL step %.9g, lambda %.9g.",
                    iteration + 1,
                    iterations,
                    report.regularized_return,
                    report.kl_step,
                    report.lambda_used,
                )

        return self.result(reports)

    def sample_real(self, size: int) -> OfflineDataset:
        return self.real.subset(self.rng.integers(len(self.real), size=size))

    def mixed_batch(self, synthetic: OfflineDataset) -> OfflineDataset:
        """
        Пакет из реальных и синтетических переходов в доле ``real_ratio``.

        :param synthetic: Синтетические переходы
        :return:
        """

        size = self.config.batch_size
        n_real = size if len(synthetic) == 0 else int(round(self.config.real_ratio * size))
        parts = [self.sample_real(n_real)]
        if size > n_real:
            parts.append(synthetic.subset(self.rng.integers(len(synthetic), size=size - n_real)))

        return OfflineDataset.concatenate(parts)

    def update_belief(
        self,
        iteration: int,
        batch: OfflineDataset,
        q: QFunction,
        policy: SoftPolicy,
        reference: SoftPolicy,
    ) -> None:
        """
        Обновление распределения над моделями по реальному пакету.

        При усреднённом использовании моделей распределение остаётся равномерным.

        :param iteration: Номер итерации
        :param batch: Реальные переходы
        :param q: Текущий критик
        :param policy: Текущая политика
        :param reference: Опорная политика
        :return:
        """

        config = self.config
        if config.average_utilization or iteration % config.belief_update_every:
            return

        if config.belief_rule == BeliefRule.LIKELIHOOD:
            if self.ensemble.kind != ModelKind.CATEGORICAL:
                raise ConfigurationError("likelihood belief rule requires categorical models")
            self.belief = bayes_filter_update(self.belief, self.ensemble, batch)
            return

        scores = consistency_scores(
            batch,
            q,
            policy,
            self.ensemble,
            self.alpha,
            config.gamma,
            reference=reference,
            mode=self.mode,
            n_samples=config.n_next_samples,
            rng_seed=self.rng,
        )
        self.belief = posterior_update(self.belief, scores)

    def synthetic(self, policy: SoftPolicy) -> OfflineDataset:
        start = self.real.states[self.rng.integers(len(self.real), size=self.config.n_rollouts)]

        return generate_synthetic(self.ensemble, self.belief, policy, start, self.config.rollout_horizon, self.rng)

    def report_base(self, iteration: int) -> dict:
        return {
            "iteration": iteration,
            "variant": self.config.variant,
            "prior": self.belief.prior.tolist(),
            "posterior": self.belief.posterior.tolist(),
            "beta": self.belief.beta,
        }


class TabularTrainer(BaseTrainer):
    """
    Табличный трек: точная (или стохастическая) оценка на смеси моделей и шаг улучшения по состояниям.
    """

    model_kind = ModelKind.CATEGORICAL

    def __init__(
        self,
        dataset: OfflineDataset,
        config: PspoConfig,
        seed: int,
        mdp: TabularMdp,
        reference: Optional[SoftPolicy] = None,
        ensemble: Optional[ModelEnsemble] = None,
        initial_policy: Optional[SoftPolicy] = None,
    ) -> None:
        self.mdp = mdp
        super().__init__(dataset, config, seed, mdp.r_max, ensemble)
        if (self.ensemble.n_states, self.ensemble.n_actions) != (mdp.n_states, mdp.n_actions):
            raise ConfigurationError("ensemble dimensions do not match the MDP")
        if reference is None:
            reference = behavior_frequencies(self.real, mdp.n_states, mdp.n_actions, config.behavior_smoothing)
        self.reference = SoftPolicy.uniform(mdp.n_states, mdp.n_actions) if config.uniform_reference else reference
        self.policy = self.reference if initial_policy is None else initial_policy
        self.target_policy = self.policy
        self.q = QFunction.zeros(mdp.n_states, mdp.n_actions)
        self.target_q = self.q
        self.step = 0

    def fit_dynamics(self) -> ModelEnsemble:
        pool = fit_ensemble(
            self.real,
            ModelKind.CATEGORICAL,
            self.member_seeds(),
            n_states=self.mdp.n_states,
            n_actions=self.mdp.n_actions,
            smoothing=self.config.dynamics_smoothing,
        )

        return draw_active(pool, self.config.ensemble_size, self.active_seed())

    def evaluate(self, context: OperatorContext, queries: OfflineDataset) -> np.ndarray:
        """
        Оценка Q на смеси моделей; возвращает TD-цели, по которым проверяется граница дисперсии.

        Точный решатель находит неподвижную точку оператора. Стохастические шаги берут ``V`` из целевой Q.

        :param context: Контекст оператора
        :param queries: Пары ``(s, a)`` для стохастических шагов и сводки целей
        :return:
        """

        config = self.config
        states, actions = queries.state_indices(), queries.actions
        if config.evaluation_solver == EvaluationSolver.EXACT:
            self.q = exact_fixed_point(OperatorTag.for_mode(self.mode), context, q0=self.q)
            return sample_targets(self.q, states, actions, context, self.mode, self.r_max, self.rng)

        collected = []
        for _ in range(config.stochastic_steps):
            self.q, summary = stochastic_q_update(
                self.q,
                states,
                actions,
                context,
                self.mode,
                self.step,
                config.schedule,
                self.r_max,
                self.rng,
                target=self.target_q,
            )
            self.step += 1
            collected.append(summary.targets)

        return np.concatenate(collected)

    def condition(self, mixture: TabularMdp) -> Optional[ImprovementCondition]:
        if not self.config.check_improvement:
            return None
        if np.any(self.policy.probs <= 0.0):
            logger.debug("Improvement condition skipped: policy has zero entries.")
            return None

        return improvement_condition_check(mixture, self.policy, self.reference, self.alpha, self.config.fd_step)

    def iteration(self, iteration: int) -> IterationReport:
        config = self.config
        batch = self.sample_real(config.batch_size)
        self.update_belief(iteration, batch, self.q, self.policy, self.reference)
        synthetic = self.synthetic(self.target_policy)
        queries = self.mixed_batch(synthetic)

        context = OperatorContext(
            ensemble=self.ensemble,
            belief=self.belief,
            gamma=config.gamma,
            alpha=self.alpha,
            policy=self.policy,
            reference=self.reference,
        )
        targets = self.evaluate(context, queries)

        mixture = mixture_mdp(self.belief, self.ensemble, config.gamma, self.mdp.rho0, self.r_max)
        weights = None
        if config.trust_region_aggregation == TrustRegionAggregation.OCCUPANCY_MEAN:
            weights = discounted_occupancy(mixture, self.policy)
        condition = self.condition(mixture)
        previous = self.policy
        self.policy, lam = constrained_improvement_step(
            self.q,
            previous,
            self.reference,
            self.improvement_alpha,
            config.epsilon_trust,
            config.trust_region_aggregation,
            weights,
        )

        kl_step = aggregate_divergence(
            kl_rows(self.policy.probs, previous.probs), config.trust_region_aggregation, weights
        )
        before, after = expected_return(mixture, previous), expected_return(mixture, self.policy)
        variance = _variance(targets, self.r_max, config.gamma)
        if not variance.passed:
            logger.warning("Target variance %.9g exceeds bound %.9g.", variance.variance, variance.bound)

        tau = config.polyak
        self.target_q = QFunction(values=tau * self.q.values + (1.0 - tau) * self.target_q.values)
        self.target_policy = SoftPolicy(probs=tau * self.policy.probs + (1.0 - tau) * self.target_policy.probs)

        return IterationReport(
            **self.report_base(iteration),
            mean_target=float(targets.mean()),
            target_variance=variance.variance,
            variance_bound=variance.bound,
            variance_ok=variance.passed,
            regularized_return=regularized_return(mixture, self.policy, self.reference, self.alpha),
            regularized_return_before=regularized_return(mixture, previous, self.reference, self.alpha),
            exact_return=expected_return(self.mdp, self.policy),
            mixture_return_before=before,
            mixture_return_after=after,
            monotonic=after >= before - MONOTONIC_TOLERANCE,
            condition_holds=None if condition is None else condition.holds,
            condition_lhs=None if condition is None else condition.lhs,
            condition_rhs=None if condition is None else condition.rhs,
            kl_step=kl_step,
            trust_region_ok=kl_step <= config.epsilon_trust + TRUST_REGION_TOLERANCE,
            lambda_used=lam,
            n_synthetic=len(synthetic),
        )

    def result(self, reports: list[IterationReport]) -> TrainingResult:
        return TrainingResult(
            policy=self.policy,
            q=self.q,
            target_policy=self.target_policy,
            target_q=self.target_q,
            belief=self.belief,
            ensemble=self.ensemble,
            reports=reports,
        )


class ContinuousTrainer(BaseTrainer):
    """
    Непрерывный трек: линейный критик над признаками пары, гауссовы модели и политика
    ``log pi ∝ kappa log mu + theta . psi``.
    """

    model_kind = ModelKind.GAUSSIAN

    def __init__(
        self,
        dataset: OfflineDataset,
        config: PspoConfig,
        seed: int,
        features: FeatureMap,
        reference: SoftPolicy,
        r_max: float,
        ensemble: Optional[ModelEnsemble] = None,
        initial_policy: Optional[SoftPolicy] = None,
    ) -> None:
        self.features = features
        super().__init__(dataset, config, seed, r_max, ensemble)
        if reference.representation != Representation.LINEAR:
            raise ConfigurationError("continuous training requires a linear reference policy")
        reference_log_probs = reference.reference_log_probs
        if config.uniform_reference:
            reference_log_probs = np.full(features.n_actions, -np.log(features.n_actions))
        self.reference = SoftPolicy(
            representation=Representation.LINEAR,
            theta=np.zeros(features.dim),
            reference_log_probs=reference_log_probs,
            feature_map_id=features.feature_map_id,
        )
        self.reference_probs = np.exp(reference_log_probs)
        self.policy = self.reference if initial_policy is None else initial_policy
        self.target_policy = self.policy
        self.q = QFunction(
            representation=Representation.LINEAR, weights=np.zeros(features.dim), feature_map_id=features.feature_map_id
        )
        self.target_q = self.q
        first = np.concatenate([[True], self.real.dones[:-1]])
        self.start_states = self.real.states[first]

    def fit_dynamics(self) -> ModelEnsemble:
        pool = fit_ensemble(
            self.real,
            ModelKind.GAUSSIAN,
            self.member_seeds(),
            features=self.features,
            epochs=self.config.dynamics_epochs,
            learning_rate=self.config.dynamics_learning_rate,
        )

        return draw_active(pool, self.config.ensemble_size, self.active_seed(), features=self.features)

    def linear_q(self, weights: np.ndarray) -> QFunction:
        return QFunction(
            representation=Representation.LINEAR, weights=weights, feature_map_id=self.features.feature_map_id
        )

    def critic_targets(self, queries: OfflineDataset) -> np.ndarray:
        """
        ``Y = r + gamma (1 - done) mean_k V(s'_k)``: для каждой пары выбирается модель из апостериорного
        распределения и ``n_next_samples`` следующих состояний; ``V`` считается по целевому критику
        с ограничением ``|Q| <= R_max / (1 - gamma)``, в терминальных состояниях ``V = 0``.

        :param queries: Переходы пакета
        :return:
        """

        config = self.config
        size, width, n_samples = len(queries), queries.state_dim, config.n_next_samples
        bound = value_bound(self.r_max, config.gamma)
        design = self.features.state_action(queries.states, queries.actions)
        models = sample_models(self.belief, size, self.rng)
        noise = self.rng.standard_normal((size, n_samples, width + 1))

        next_states = np.empty((size, n_samples, width))
        for member_index in np.unique(models):
            rows = np.flatnonzero(models == member_index)
            next_states[rows] = self.ensemble.members[member_index].sample(design[rows], noise[rows])[:, :, :width]
        flat = self.features.clip_states(next_states.reshape(-1, width))
        next_features = self.features.all_actions(flat)

        q_rows = np.clip(next_features @ self.target_q.weights, -bound, bound)
        probs = action_probabilities(self.policy, flat, action_features=next_features)
        values = np.clip(state_values(q_rows, probs, self.reference_probs, self.alpha, self.mode), -bound, bound)
        values = np.where(self.features.is_terminal(flat), 0.0, values).reshape(size, n_samples).mean(axis=1)
        rewards = np.clip(queries.rewards, -self.r_max, self.r_max)

        return rewards + config.gamma * (1.0 - queries.dones) * values

    def regularized_estimate(self, policy: SoftPolicy, start_features: np.ndarray) -> float:
        q_rows = start_features @ self.q.weights
        probs = action_probabilities(policy, self.start_states, action_features=start_features)
        values = state_values(q_rows, probs, self.reference_probs, self.alpha, ValueMode.REGULARIZED_POLICY)

        return float(values.mean())

    def spearman(self, queries: OfflineDataset, targets: np.ndarray) -> Optional[float]:
        uncertainty = uncertainty_metric(self.ensemble, self.belief, queries.states, queries.actions)
        pairs = [(float(u), float(y)) for u, y in zip(uncertainty, targets)]
        self.uncertainty_samples = (self.uncertainty_samples + pairs)[-UNCERTAINTY_SAMPLE_LIMIT:]
        if np.ptp(uncertainty) == 0.0 or np.ptp(targets) == 0.0:
            return None

        return float(spearmanr(uncertainty, targets).correlation)

    def iteration(self, iteration: int) -> IterationReport:
        config = self.config
        batch = self.sample_real(config.batch_size)
        self.update_belief(iteration, batch, self.q, self.policy, self.reference)
        synthetic = self.synthetic(self.target_policy)
        queries = self.mixed_batch(synthetic)

        targets = self.critic_targets(queries)
        design = self.features.state_action(queries.states, queries.actions)
        gram = design.T @ design + config.critic_ridge * np.eye(self.features.dim)
        projected = linalg.lstsq(gram, design.T @ targets)[0]
        rate = config.schedule.rate(iteration)
        self.q = self.linear_q(self.q.weights + rate * (projected - self.q.weights))

        action_features = self.features.all_actions(queries.states)
        previous = self.policy
        self.policy, lam = linear_improvement_step(
            self.q.weights,
            previous,
            action_features,
            self.improvement_alpha,
            config.epsilon_trust,
            config.trust_region_aggregation,
        )
        old_probs = action_probabilities(previous, queries.states, action_features=action_features)
        new_probs = action_probabilities(self.policy, queries.states, action_features=action_features)
        kl_step = aggregate_divergence(kl_rows(new_probs, old_probs), config.trust_region_aggregation, None)

        start_features = self.features.all_actions(self.start_states)
        variance = _variance(targets, self.r_max, config.gamma)
        if not variance.passed:
            logger.warning("Target variance %.9g exceeds bound %.9g.", variance.variance, variance.bound)
        spearman = self.spearman(queries, targets)

        tau = config.polyak
        self.target_q = self.linear_q(tau * self.q.weights + (1.0 - tau) * self.target_q.weights)
        self.target_policy = SoftPolicy(
            representation=Representation.LINEAR,
            kappa=tau * self.policy.kappa + (1.0 - tau) * self.target_policy.kappa,
            theta=tau * self.policy.theta + (1.0 - tau) * self.target_policy.theta,
            reference_log_probs=self.reference.reference_log_probs,
            feature_map_id=self.features.feature_map_id,
        )

        return IterationReport(
            **self.report_base(iteration),
            mean_target=float(targets.mean()),
            target_variance=variance.variance,
            variance_bound=variance.bound,
            variance_ok=variance.passed,
            regularized_return=self.regularized_estimate(self.policy, start_features),
            regularized_return_before=self.regularized_estimate(previous, start_features),
            kl_step=kl_step,
            trust_region_ok=kl_step <= config.epsilon_trust + TRUST_REGION_TOLERANCE,
            lambda_used=lam,
            n_synthetic=len(synthetic),
            uncertainty_td_spearman=spearman,
        )

    def result(self, reports: list[IterationReport]) -> TrainingResult:
        return TrainingResult(
            policy=self.policy,
            q=self.q,
            target_policy=self.target_policy,
            target_q=self.target_q,
            belief=self.belief,
            ensemble=self.ensemble,
            reports=reports,
            uncertainty_samples=self.uncertainty_samples,
        )


def pspo_train(
    dataset: OfflineDataset,
    config: PspoConfig,
    seed: int,
    mdp: Optional[TabularMdp] = None,
    features: Optional[FeatureMap] = None,
    reference: Optional[SoftPolicy] = None,
    ensemble: Optional[ModelEnsemble] = None,
    r_max: Optional[float] = None,
    initial_policy: Optional[SoftPolicy] = None,
    callback: Optional[Callable[[IterationReport], None]] = None,
) -> TrainingResult:
    """
    Обучение политики на офлайн-данных.

    Для дискретного набора нужен MDP (размерности, ``rho0``, ``R_max`` и точная оценка ``J``), опорная политика
    по умолчанию – частоты действий в данных. Для непрерывного нужны признаковое отображение, поведенческая
    политика в линейном представлении и ``R_max``. Если ансамбль не передан, он обучается по данным.

    :param dataset: Офлайн-данные
    :param config: Гиперпараметры
    :param seed: Зерно; все потоки случайных чисел выводятся из него
    :param mdp: Истинный MDP (табличный трек)
    :param features: Признаковое отображение (непрерывный трек)
    :param reference: Опорная политика ``mu``
    :param ensemble: Готовый ансамбль моделей
    :param r_max: Граница наград (непрерывный трек)
    :param initial_policy: Начальная политика; по умолчанию ``mu``
    :param callback: Вызывается с отчётом каждой итерации
    :return:
    """

    if len(dataset) == 0:
        raise ValueError("training dataset must not be empty")

    trainer: BaseTrainer
    if dataset.kind == StateKind.DISCRETE:
        if mdp is None:
            raise ConfigurationError("tabular training requires the MDP")
        trainer = TabularTrainer(dataset, config, seed, mdp, reference, ensemble, initial_policy)
    else:
        if features is None or reference is None or r_max is None:
            raise ConfigurationError("continuous training requires features, the reference policy and r_max")
        trainer = ContinuousTrainer(dataset, config, seed, features, reference, r_max, ensemble, initial_policy)

    logger.info("Training variant %s for %s iterations.", config.variant, config.iterations)

    return trainer.train(callback)
