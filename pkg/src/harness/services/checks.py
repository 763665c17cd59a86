"""
Наборы проверок свойств алгоритма на самостоятельно генерируемых задачах.

Нарушения не прерывают выполнение: каждый набор возвращает :class:`CheckResult` с измеренной статистикой.
"""

import logging
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy.special import rel_entr
from scipy.stats import spearmanr

from belief.services.posterior import posterior_brute_force, posterior_update, uncertainty_metric
from belief.services.shemas import Belief, ConsistencyScore
from dynamics.services.fitting import draw_active, fit_ensemble
from dynamics.services.shemas import CategoricalModel, ModelEnsemble, ModelKind
from harness.services.pipeline import UNCERTAINTY_NAME
from harness.services.seeding import CHECKS, derive_seed, derive_seeds
from harness.services.shemas import CheckResult, CheckSuite, ExperimentConfig
from liquidation.services.environment import generate_liquidation_dataset
from liquidation.services.features import LiquidationFeatures
from mdp.services.divergence import soft_value_rows
from mdp.services.generator import generate_tabular_dataset, random_tabular_mdp
from mdp.services.shemas import QFunction, SoftPolicy, ValueMode
from pspo.services.diagnostics import contraction_check
from pspo.services.improvement import closed_form_optimal_policy
from pspo.services.operators import OperatorContext, OperatorTag, exact_fixed_point
from pspo.services.shemas import EvaluationSolver, LearningRateSchedule, ScheduleKind
from pspo.services.stochastic import sample_targets, stochastic_q_update, value_bound, variance_bound_check
from pspo.services.training import TrainingResult, pspo_train

logger = logging.getLogger()

NON_EXPANSION_TOLERANCE = 1e-12
CLOSED_FORM_MARGIN = -1e-9
EXTREMAL_VARIANCE_RATIO = 0.95
ROBBINS_MONRO_TOLERANCE = 1e-2
TRUST_REGION_TOLERANCE = 1e-6
POSTERIOR_GRID_STEP = 1e-3


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> SoftPolicy:
    return SoftPolicy(probs=rng.dirichlet(np.full(n_actions, 3.0), size=n_states))


def random_context(
    rng: np.random.Generator,
    gamma: float,
    alpha: float,
    n_states: Optional[int] = None,
    n_actions: Optional[int] = None,
    n_models: int = 2,
) -> OperatorContext:
    """
    Случайный ансамбль табличных моделей (до 6 состояний и 4 действий) со случайными весами,
    политикой и опорной политикой.

    :param rng: Генератор
    :param gamma: Дисконт
    :param alpha: Сила регуляризации
    :param n_states: Число состояний; по умолчанию случайно от 2 до 6
    :param n_actions: Число действий; по умолчанию случайно от 2 до 4
    :param n_models: Число моделей
    :return:
    """

    n_states = n_states or int(rng.integers(2, 7))
    n_actions = n_actions or int(rng.integers(2, 5))
    members = []
    for _ in range(n_models):
        mdp = random_tabular_mdp(n_states, n_actions, gamma=gamma, seed=rng)
        members.append(CategoricalModel(counts=mdp.transition, smoothing=0.0, reward_estimate=mdp.reward))

    return OperatorContext(
        ensemble=ModelEnsemble(kind=ModelKind.CATEGORICAL, members=members),
        belief=Belief.uniform(n_models).with_posterior(rng.dirichlet(np.ones(n_models))),
        gamma=gamma,
        alpha=alpha,
        policy=random_policy(rng, n_states, n_actions),
        reference=random_policy(rng, n_states, n_actions),
    )


def frozen_two_state_context() -> OperatorContext:
    """
    Фиксированная задача из двух состояний и двух действий с двумя моделями и замороженными весами.

    :return:
    """

    first = CategoricalModel(
        counts=[[[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.1, 0.9]]],
        smoothing=0.0,
        reward_estimate=[[1.0, 0.0], [0.5, -0.5]],
    )
    second = CategoricalModel(
        counts=[[[0.6, 0.4], [0.4, 0.6]], [[0.7, 0.3], [0.3, 0.7]]],
        smoothing=0.0,
        reward_estimate=[[0.8, 0.2], [0.4, -0.3]],
    )

    return OperatorContext(
        ensemble=ModelEnsemble(kind=ModelKind.CATEGORICAL, members=[first, second]),
        belief=Belief.uniform(2).with_posterior(np.array([0.4, 0.6])),
        gamma=0.3,
        policy=SoftPolicy(probs=[[0.3, 0.7], [0.6, 0.4]]),
        reference=SoftPolicy(probs=[[0.5, 0.5], [0.2, 0.8]]),
    )


class CheckRunner:
    """
    Запуск наборов проверок. Зерно каждого набора выводится из главного зерна и названия набора.

    В быстром режиме число задач и шагов уменьшено.
    """

    def __init__(self, config: ExperimentConfig, quick: bool = False, run_dir: Optional[Path] = None) -> None:
        """
        Конструктор.

        :param config: Конфигурация эксперимента (дисконт, alpha, зерно, окружение ликвидации)
        :param quick: Быстрый режим
        :param run_dir: Каталог обученного запуска для диагностики корреляции
        """

        self.config = config
        self.quick = quick
        self.run_dir = run_dir
        self._runs: Optional[list[TrainingResult]] = None

    def rng(self, suite: CheckSuite) -> np.random.Generator:
        return np.random.default_rng(derive_seed(self.config.seed, f"{CHECKS}.{suite.value}"))

    def run(self, suites: Optional[list[CheckSuite]] = None) -> list[CheckResult]:
        """
        Запуск выбранных наборов.

        :param suites: Наборы; по умолчанию из конфигурации
        :return:
        """

        handlers: dict[CheckSuite, Callable[[], CheckResult]] = {
            CheckSuite.CONTRACTION: self.contraction,
            CheckSuite.VARIANCE: self.variance,
            CheckSuite.ROBBINS_MONRO: self.robbins_monro,
            CheckSuite.POSTERIOR: self.posterior,
            CheckSuite.CLOSED_FORM: self.closed_form,
            CheckSuite.MONOTONIC: self.monotonic,
            CheckSuite.TRUST_REGION: self.trust_region,
            CheckSuite.NON_EXPANSION: self.non_expansion,
            CheckSuite.CORRELATION: self.correlation,
        }
        results = []
        for suite in suites or self.config.suites:
            result = handlers[suite]()
            if result.passed is False:
                logger.warning("Check %s failed: %s", suite.value, result.message)
            else:
                logger.info("Check %s: passed=%s %s", suite.value, result.passed, result.statistics)
            results.append(result)

        return results

    def contraction(self) -> CheckResult:
        """
        ``||B Q1 - B Q2||_inf <= gamma ||Q1 - Q2||_inf`` для операторов оценки, оптимальности и оценки
        со штрафом KL на случайных задачах и парах Q-функций.

        :return:
        """

        rng = self.rng(CheckSuite.CONTRACTION)
        n_instances, n_pairs = (5, 50) if self.quick else (20, 1000)
        gamma = self.config.gamma
        excess, max_lhs, failures = -np.inf, 0.0, 0
        for _ in range(n_instances):
            context = random_context(rng, gamma, self.config.alpha)
            shape = (context.ensemble.n_states, context.ensemble.n_actions)
            scale = value_bound(1.0, gamma)
            for _ in range(n_pairs):
                q1 = QFunction(values=rng.uniform(-scale, scale, size=shape))
                q2 = QFunction(values=rng.uniform(-scale, scale, size=shape))
                for tag in OperatorTag:
                    check = contraction_check(tag, q1, q2, context)
                    excess = max(excess, check.lhs - check.rhs)
                    max_lhs = max(max_lhs, check.lhs)
                    failures += int(not check.passed)
        n_checks = n_instances * n_pairs * len(OperatorTag)

        return CheckResult(
            suite=CheckSuite.CONTRACTION,
            passed=failures == 0,
            statistics={"n_checks": n_checks, "failures": failures, "max_excess": excess, "max_lhs": max_lhs},
            message=f"{failures} of {n_checks} operator pairs violate the contraction bound",
        )

    def variance(self) -> CheckResult:
        """
        Выборочная дисперсия целей на случайных задачах не превышает ``R_max^2 / (1 - gamma)^2``;
        двухточечные цели ``±R_max / (1 - gamma)`` достигают не менее 95% границы.

        :return:
        """

        rng = self.rng(CheckSuite.VARIANCE)
        gamma = self.config.gamma
        bound = value_bound(1.0, gamma)
        max_ratio, failures, n_instances = 0.0, 0, 5 if self.quick else 20
        for _ in range(n_instances):
            context = random_context(rng, gamma, self.config.alpha)
            n_states, n_actions = context.ensemble.n_states, context.ensemble.n_actions
            q = QFunction(values=rng.uniform(-10.0 * bound, 10.0 * bound, size=(n_states, n_actions)))
            states = rng.integers(n_states, size=500)
            actions = rng.integers(n_actions, size=500)
            for mode in ValueMode:
                check = variance_bound_check(sample_targets(q, states, actions, context, mode, 1.0, rng), 1.0, gamma)
                max_ratio = max(max_ratio, check.variance / check.bound)
                failures += int(not check.passed)
        extremal = variance_bound_check(np.tile([bound, -bound], 500), 1.0, gamma)
        extremal_ratio = extremal.variance / extremal.bound

        return CheckResult(
            suite=CheckSuite.VARIANCE,
            passed=failures == 0 and extremal_ratio >= EXTREMAL_VARIANCE_RATIO,
            statistics={"bound": extremal.bound, "max_ratio": max_ratio, "extremal_ratio": extremal_ratio},
            message=f"{failures} target batches exceed the bound, extremal ratio {extremal_ratio:.9g}",
        )

    def robbins_monro(self) -> CheckResult:
        """
        Стохастическая оценка с расписанием Роббинса–Монро сходится к точной неподвижной точке
        на фиксированной задаче; критерий – медиана ошибки по зёрнам.

        :return:
        """

        n_seeds, n_steps, tolerance = (3, 20_000, 2.0 * ROBBINS_MONRO_TOLERANCE) if self.quick else (10, 50_000, 1e-2)
        context = frozen_two_state_context()
        fixed_point = exact_fixed_point(OperatorTag.EVALUATION, context)
        schedule = LearningRateSchedule(kind=ScheduleKind.ROBBINS_MONRO, c=1.0, t0=1.0)
        states, actions = np.divmod(np.arange(4), 2)
        errors = []
        for seed in derive_seeds(self.config.seed, f"{CHECKS}.{CheckSuite.ROBBINS_MONRO.value}", n_seeds):
            rng = np.random.default_rng(seed)
            q = QFunction.zeros(2, 2)
            for step in range(n_steps):
                q, _ = stochastic_q_update(q, states, actions, context, ValueMode.POLICY, step, schedule, 1.0, rng)
            errors.append(float(np.max(np.abs(q.values - fixed_point.values))))
        median = float(np.median(errors))

        return CheckResult(
            suite=CheckSuite.ROBBINS_MONRO,
            passed=median < tolerance,
            statistics={"median_error": median, "max_error": max(errors), "updates": 4 * n_steps},
            message=f"median sup-norm error {median:.9g} after {4 * n_steps} updates",
        )

    def posterior(self) -> CheckResult:
        """
        Замкнутая форма апостериорного распределения совпадает с перебором по сетке симплекса
        с точностью ``2 * grid_step`` по L1.

        :return:
        """

        rng = self.rng(CheckSuite.POSTERIOR)
        n_instances, grid_step = (20, 1e-2) if self.quick else (200, POSTERIOR_GRID_STEP)
        worst = 0.0
        for _ in range(n_instances):
            size = int(rng.integers(2, 4))
            belief = Belief.uniform(size, beta=float(rng.uniform(0.1, 10.0)), prior=rng.dirichlet(np.full(size, 2.0)))
            scores = ConsistencyScore(scores=rng.uniform(0.0, 1.0, size))
            grid = posterior_brute_force(belief, scores, grid_step)
            worst = max(worst, float(np.abs(grid - posterior_update(belief, scores).posterior).sum()))

        return CheckResult(
            suite=CheckSuite.POSTERIOR,
            passed=worst <= 2.0 * grid_step,
            statistics={"max_l1": worst, "grid_step": grid_step, "n_instances": n_instances},
            message=f"largest L1 distance to the grid optimum {worst:.9g}",
        )

    def closed_form(self) -> CheckResult:
        """
        Политика ``pi ∝ mu exp(Q*/alpha)`` не уступает ни одной точке сетки симплекса с шагом 1e-3
        по регуляризованной цели каждого состояния (задачи с двумя действиями).

        :return:
        """

        rng = self.rng(CheckSuite.CLOSED_FORM)
        alpha = self.config.alpha
        grid = np.linspace(0.0, 1.0, 1001)
        candidates = np.column_stack([grid, 1.0 - grid])
        margin = np.inf
        for _ in range(5 if self.quick else 20):
            context = random_context(rng, self.config.gamma, alpha, n_actions=2)
            q_star = exact_fixed_point(OperatorTag.OPTIMALITY, context)
            reference = context.reference
            policy = closed_form_optimal_policy(q_star, reference, alpha)
            for state in range(q_star.values.shape[0]):
                q_row, mu_row = q_star.values[state], reference.probs[state]
                grid_values = candidates @ q_row - alpha * rel_entr(candidates, mu_row).sum(axis=1)
                best = policy.probs[state] @ q_row - alpha * rel_entr(policy.probs[state], mu_row).sum()
                margin = min(margin, float(best - grid_values.max()))

        return CheckResult(
            suite=CheckSuite.CLOSED_FORM,
            passed=margin >= CLOSED_FORM_MARGIN,
            statistics={"min_margin": margin},
            message=f"smallest margin over the grid {margin:.9g}",
        )

    def training_runs(self) -> list[TrainingResult]:
        """
        Небольшие табличные запуски с точной оценкой (кэшируются для проверок монотонности
        и доверительной области).

        :return:
        """

        if self._runs is not None:
            return self._runs

        n_runs, iterations = (2, 3) if self.quick else (10, 10)
        config = self.config.pspo.copy(
            update={
                "iterations": iterations,
                "check_improvement": True,
                "evaluation_mode": ValueMode.REGULARIZED_POLICY,
                "evaluation_solver": EvaluationSolver.EXACT,
                "ensemble_size": 3,
                "model_pool_size": 3,
                "batch_size": 64,
                "n_rollouts": 16,
                "rollout_horizon": 2,
            }
        )
        self._runs = []
        for seed in derive_seeds(self.config.seed, f"{CHECKS}.training", n_runs):
            mdp = random_tabular_mdp(5, 3, gamma=self.config.gamma, seed=seed)
            dataset = generate_tabular_dataset(mdp, SoftPolicy.uniform(5, 3), 2000, episode_length=50, seed=seed)
            self._runs.append(pspo_train(dataset, config, seed, mdp=mdp))

        return self._runs

    def monotonic(self) -> CheckResult:
        """
        На итерациях, где выполнено условие улучшения, ``J`` на смеси моделей не убывает (допуск 1e-8).

        :return:
        """

        runs = self.training_runs()
        reports = [report for result in runs for report in result.reports]
        holds = sum(1 for report in reports if report.condition_holds)
        violations = sum(result.monotonic_violations for result in runs)

        return CheckResult(
            suite=CheckSuite.MONOTONIC,
            passed=violations == 0,
            statistics={
                "iterations": len(reports),
                "condition_fraction": holds / len(reports) if reports else 0.0,
                "violations": violations,
            },
            message=f"{violations} monotonicity violations over {len(reports)} iterations",
        )

    def trust_region(self) -> CheckResult:
        """
        ``max_s KL(pi_new || pi_old) <= epsilon + 1e-6`` на всех итерациях.

        :return:
        """

        reports = [report for result in self.training_runs() for report in result.reports]
        epsilon = self.config.epsilon_trust
        excess = max((report.kl_step - epsilon for report in reports), default=-epsilon)
        failures = sum(1 for report in reports if not report.trust_region_ok)

        return CheckResult(
            suite=CheckSuite.TRUST_REGION,
            passed=failures == 0 and excess <= TRUST_REGION_TOLERANCE,
            statistics={"iterations": len(reports), "max_excess": excess, "failures": failures},
            message=f"{failures} iterations leave the trust region",
        )

    def non_expansion(self) -> CheckResult:
        """
        Мягкая ценность не растягивает расстояние: ``|V1 - V2| <= ||Q1 - Q2||_inf`` по строкам.

        :return:
        """

        rng = self.rng(CheckSuite.NON_EXPANSION)
        max_ratio = 0.0
        for _ in range(20 if self.quick else 1000):
            n_actions = int(rng.integers(2, 6))
            alpha = float(np.exp(rng.uniform(np.log(1e-3), np.log(10.0))))
            mu = rng.dirichlet(np.ones(n_actions), size=8)
            q1 = rng.normal(scale=5.0, size=(8, n_actions))
            q2 = q1 + rng.normal(size=(8, n_actions))
            gap = np.abs(soft_value_rows(q1, mu, alpha) - soft_value_rows(q2, mu, alpha))
            max_ratio = max(max_ratio, float(np.max(gap / np.max(np.abs(q1 - q2), axis=1))))

        return CheckResult(
            suite=CheckSuite.NON_EXPANSION,
            passed=max_ratio <= 1.0 + NON_EXPANSION_TOLERANCE,
            statistics={"max_ratio": max_ratio},
            message=f"largest value gap relative to the Q gap {max_ratio:.9g}",
        )

    def correlation(self) -> CheckResult:
        """
        Ранговая корреляция Спирмена между неопределённостью ансамбля и TD-целями.

        Если в каталоге запуска есть пары обученного запуска, критерий – отрицательный знак. Иначе
        коэффициент считается для необученного ансамбля на малом наборе ликвидации без критерия.

        :return:
        """

        path = Path(self.run_dir) / UNCERTAINTY_NAME if self.run_dir is not None else None
        if path is not None and path.exists():
            frame = pd.read_csv(path)
            if len(frame) >= 2:
                coefficient = float(spearmanr(frame["uncertainty"], frame["td_target"]).correlation)
                return CheckResult(
                    suite=CheckSuite.CORRELATION,
                    passed=bool(coefficient < 0.0),
                    statistics={"spearman": coefficient, "n_samples": len(frame)},
                    message=f"trained run: spearman {coefficient:.9g}",
                )

        coefficient, n_samples = self.untrained_correlation()

        return CheckResult(
            suite=CheckSuite.CORRELATION,
            passed=None,
            statistics={"spearman": coefficient, "n_samples": n_samples},
            message="untrained ensemble: coefficient reported without a criterion",
        )

    def untrained_correlation(self) -> tuple[float, int]:
        """
        Коэффициент для ансамбля после одной эпохи обучения; TD-цель нулевого критика равна награде.

        :return:
        """

        seed = derive_seed(self.config.seed, f"{CHECKS}.{CheckSuite.CORRELATION.value}")
        liquidation = self.config.liquidation
        features = LiquidationFeatures.from_config(liquidation)
        dataset = generate_liquidation_dataset(liquidation, 20, seed)
        pool = fit_ensemble(dataset, ModelKind.GAUSSIAN, derive_seeds(seed, CHECKS, 3), features=features, epochs=1)
        ensemble = draw_active(pool, 3, seed, features)
        uncertainty = uncertainty_metric(ensemble, Belief.uniform(3), dataset.states, dataset.actions)

        return float(spearmanr(uncertainty, dataset.rewards).correlation), len(dataset)
