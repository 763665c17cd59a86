"""
Этапы эксперимента: генерация данных, обучение моделей динамики, обучение и оценка политики, абляции.
"""

import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np
import pandas as pd

from app.settings import PSPO_OUTPUT_DIR
from base.exceptions import ConfigurationError
from dynamics.clients.ensemble import EnsembleClient
from dynamics.services.fitting import draw_active, fit_ensemble
from dynamics.services.shemas import ModelEnsemble, ModelKind
from harness.clients.run import EVALUATION_NAME, RunClient
from harness.services.seeding import (
    ACTIVE,
    BEHAVIOR,
    DATASET,
    DYNAMICS,
    EVALUATION,
    INSTANCE,
    TRAINING,
    TUNING,
    derive_seed,
    derive_seeds,
)
from harness.services.shemas import BehaviorKind, EvaluationReport, ExperimentConfig, Track
from liquidation.services.baselines import SoftPolicyRule, baseline_policies
from liquidation.services.behavior import behavior_policy
from liquidation.services.environment import ActionRule, behavior_rule, generate_liquidation_dataset, rollout_policy
from liquidation.services.features import LiquidationFeatures
from liquidation.services.score import normalized_score
from liquidation.services.shemas import HOLD_ACTION
from mdp.clients.artifacts import ArtifactClient
from mdp.clients.dataset import DatasetClient
from mdp.services.evaluation import expected_return
from mdp.services.generator import coverage_counts, generate_tabular_dataset, random_tabular_mdp
from mdp.services.shemas import OfflineDataset, SoftPolicy, TabularMdp
from pspo.services.shemas import IterationReport
from pspo.services.training import TrainingResult, pspo_train

logger = logging.getLogger()

DATASET_NAME = "dataset.ndjson"
MDP_NAME = "mdp.json"
ENSEMBLE_NAME = "ensemble.json"
POLICY_NAME = "policy.json"
Q_NAME = "q.json"
METRICS_NAME = "metrics.csv"
UNCERTAINTY_NAME = "uncertainty.csv"
COVERAGE_NAME = "coverage.csv"
ABLATION_SUMMARY_NAME = "ablation_summary.csv"

# варианты абляции и соответствующие флаги конфигурации
VARIANTS: dict[str, dict[str, bool]] = {
    "full": {"average_utilization": False, "without_regularization": False},
    "average_utilization": {"average_utilization": True, "without_regularization": False},
    "without_regularization": {"average_utilization": False, "without_regularization": True},
}

# столбцы CSV метрик без развёрнутых весов моделей
METRIC_COLUMNS = ["seed"] + [name for name in IterationReport.__fields__ if name not in {"prior", "posterior"}]


def with_variant(config: ExperimentConfig, variant: str) -> ExperimentConfig:
    """
    Конфигурация с флагами варианта абляции.

    :param config: Конфигурация
    :param variant: Название варианта
    :return:
    """

    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; available: {', '.join(VARIANTS)}")

    return config.copy(update=VARIANTS[variant])


def metrics_frame(reports: list[IterationReport], seed: int) -> pd.DataFrame:
    """
    Таблица отчётов итераций, первый столбец – зерно запуска.

    :param reports: Отчёты
    :param seed: Главное зерно
    :return:
    """

    if not reports:
        return pd.DataFrame(columns=METRIC_COLUMNS)

    frame = pd.DataFrame([report.to_row() for report in reports])
    frame.insert(0, "seed", seed)

    return frame


class ExperimentService:
    """
    Сервис этапов эксперимента в каталоге запуска.

    Входные артефакты (данные, MDP, ансамбль) читаются из ``inputs_dir``, по умолчанию из каталога запуска.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: Optional[Path] = None,
        inputs_dir: Optional[Path] = None,
    ) -> None:
        """
        Конструктор.

        :param config: Конфигурация эксперимента
        :param output_dir: Каталог запуска; по умолчанию из конфигурации или настроек
        :param inputs_dir: Каталог входных артефактов
        """

        self.config = config
        self.output_dir = Path(output_dir or config.output_dir or PSPO_OUTPUT_DIR / config.name)
        self.inputs_dir = Path(inputs_dir or self.output_dir)
        self.run = RunClient(self.output_dir)
        self.timings: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """
        Замер длительности фазы.

        :param name: Название фазы
        :return:
        """

        started = time.perf_counter()
        yield
        self.timings[name] = time.perf_counter() - started
        logger.info("Phase %s finished in %.3f s.", name, self.timings[name])

    def record(self, artifacts: dict[str, Path], **checks: Optional[bool]) -> None:
        self.run.record(self.config.snapshot(), artifacts, self.timings, checks)

    @property
    def features(self) -> LiquidationFeatures:
        return LiquidationFeatures.from_config(self.config.liquidation)

    @property
    def dataset_path(self) -> Path:
        return Path(self.config.dataset.path or self.inputs_dir / DATASET_NAME)

    def true_mdp(self) -> TabularMdp:
        """
        Истинный конечный MDP, полностью определяемый конфигурацией и главным зерном.

        :return:
        """

        spec = self.config.instance

        return random_tabular_mdp(
            spec.n_states,
            spec.n_actions,
            gamma=self.config.gamma,
            seed=derive_seed(self.config.seed, INSTANCE),
            r_max=spec.r_max,
            concentration=spec.concentration,
        )

    def behavior(self, mdp: TabularMdp) -> SoftPolicy:
        if self.config.instance.behavior == BehaviorKind.UNIFORM:
            return SoftPolicy.uniform(mdp.n_states, mdp.n_actions)
        rng = np.random.default_rng(derive_seed(self.config.seed, BEHAVIOR))

        return SoftPolicy(probs=rng.dirichlet(np.ones(mdp.n_actions), size=mdp.n_states))

    def load_dataset(self) -> OfflineDataset:
        if not self.dataset_path.exists():
            raise ConfigurationError(f"dataset {self.dataset_path} not found; run gen_data first")

        return DatasetClient(self.dataset_path).read()

    def load_mdp(self) -> TabularMdp:
        return ArtifactClient(self.inputs_dir).load_mdp(MDP_NAME) or self.true_mdp()

    def load_policy(self) -> SoftPolicy:
        if policy := ArtifactClient(self.output_dir).load_policy(POLICY_NAME):
            return policy

        raise ConfigurationError(f"policy not found in {self.output_dir}; run train_pspo first")

    def coverage_report(self, dataset: OfflineDataset, mdp: TabularMdp) -> Path:
        """
        Число посещений пар ``(s, a)`` в наборе данных.

        :param dataset: Набор данных
        :param mdp: MDP
        :return:
        """

        counts = coverage_counts(dataset, mdp.n_states, mdp.n_actions)
        visited = int(np.count_nonzero(counts))
        logger.info(
            "Coverage: %s of %s state-action pairs visited, min count %d.", visited, counts.size, int(counts.min())
        )
        if visited < counts.size:
            logger.warning("Dataset leaves %s state-action pairs unvisited.", counts.size - visited)
        states, actions = np.divmod(np.arange(counts.size), mdp.n_actions)
        frame = pd.DataFrame({"state": states, "action": actions, "count": counts.reshape(-1).astype(np.int64)})

        return self.run.write_frame(frame, COVERAGE_NAME)

    def generate_data(self) -> OfflineDataset:
        """
        Генерация офлайн-данных поведенческой политикой; для конечного MDP сохраняется и сам MDP.

        :return:
        """

        seed = derive_seed(self.config.seed, DATASET)
        spec = self.config.dataset
        artifacts: dict[str, Path] = {}
        with self.phase("gen_data"):
            if self.config.track == Track.TABULAR:
                mdp = self.true_mdp()
                artifacts[MDP_NAME] = ArtifactClient(self.output_dir).save_mdp(mdp, MDP_NAME)
                dataset = generate_tabular_dataset(mdp, self.behavior(mdp), spec.n_records, spec.episode_length, seed)
                artifacts[COVERAGE_NAME] = self.coverage_report(dataset, mdp)
            else:
                dataset = generate_liquidation_dataset(self.config.liquidation, spec.n_episodes, seed)
                logger.info("Hold fraction: %.9g.", float(np.mean(dataset.actions == HOLD_ACTION)))
            artifacts[DATASET_NAME] = DatasetClient(self.output_dir / DATASET_NAME).write(dataset)
        self.record(artifacts)

        return dataset

    def fit_pool(self, dataset: OfflineDataset) -> ModelEnsemble:
        """
        Обучение пула моделей с выведенными зёрнами и выбор активного ансамбля.

        :param dataset: Реальные переходы
        :return:
        """

        config = self.config
        seeds = derive_seeds(config.seed, DYNAMICS, config.model_pool_size)
        if config.track == Track.TABULAR:
            mdp = self.load_mdp()
            pool = fit_ensemble(
                dataset,
                ModelKind.CATEGORICAL,
                seeds,
                n_states=mdp.n_states,
                n_actions=mdp.n_actions,
                smoothing=config.dynamics_smoothing,
            )
            return draw_active(pool, config.ensemble_size, derive_seed(config.seed, ACTIVE))

        features = self.features
        pool = fit_ensemble(
            dataset,
            ModelKind.GAUSSIAN,
            seeds,
            features=features,
            epochs=config.dynamics_epochs,
            learning_rate=config.dynamics_learning_rate,
        )

        return draw_active(pool, config.ensemble_size, derive_seed(config.seed, ACTIVE), features)

    def train_dynamics(self) -> ModelEnsemble:
        """
        Обучение ансамбля моделей динамики по сохранённым данным.

        :return:
        """

        dataset = self.load_dataset()
        with self.phase("train_dynamics"):
            ensemble = self.fit_pool(dataset)
            path = EnsembleClient(self.output_dir).save(ensemble, ENSEMBLE_NAME)
        self.record({ENSEMBLE_NAME: path})

        return ensemble

    def train_policy(self, callback: Optional[Callable[[IterationReport], None]] = None) -> TrainingResult:
        """
        Обучение политики; сохраняются политика, Q-функция, CSV отчётов итераций и пары
        (неопределённость, TD-цель).

        :param callback: Вызывается с отчётом каждой итерации
        :return:
        """

        config = self.config
        dataset = self.load_dataset()
        ensemble = EnsembleClient(self.inputs_dir).load(ENSEMBLE_NAME)
        if ensemble is None:
            logger.info("No saved ensemble in %s; dynamics are fitted during training.", self.inputs_dir)
        seed = derive_seed(config.seed, TRAINING)
        with self.phase("train_pspo"):
            if config.track == Track.TABULAR:
                result = pspo_train(
                    dataset, config.pspo, seed, mdp=self.load_mdp(), ensemble=ensemble, callback=callback
                )
            else:
                features = self.features
                result = pspo_train(
                    dataset,
                    config.pspo,
                    seed,
                    features=features,
                    reference=behavior_policy(config.liquidation, features),
                    ensemble=ensemble,
                    r_max=config.liquidation.r_max,
                    callback=callback,
                )

        artifacts = ArtifactClient(self.output_dir)
        uncertainty = pd.DataFrame(result.uncertainty_samples, columns=["uncertainty", "td_target"])
        paths = {
            POLICY_NAME: artifacts.save_policy(result.policy, POLICY_NAME),
            Q_NAME: artifacts.save_q(result.q, Q_NAME),
            METRICS_NAME: self.run.write_frame(metrics_frame(result.reports, config.seed), METRICS_NAME),
            UNCERTAINTY_NAME: self.run.write_frame(uncertainty, UNCERTAINTY_NAME),
        }
        self.record(paths, variance_ok=self.variance_ok(result), trust_region_ok=self.trust_region_ok(result))

        return result

    @staticmethod
    def variance_ok(result: TrainingResult) -> bool:
        return all(report.variance_ok for report in result.reports)

    @staticmethod
    def trust_region_ok(result: TrainingResult) -> bool:
        return all(report.trust_region_ok for report in result.reports)

    def rollout_report(self, name: str, rule: ActionRule) -> EvaluationReport:
        """
        Оценка правила выбора действий методом Монте-Карло в окружении ликвидации.

        :param name: Название политики
        :param rule: Правило выбора действий
        :return:
        """

        episodes = self.config.n_eval_episodes
        returns = rollout_policy(self.config.liquidation, rule, episodes, derive_seed(self.config.seed, EVALUATION))
        mean = float(returns.mean())
        report = EvaluationReport(
            policy=name,
            mean_return=mean,
            std_return=float(returns.std()),
            n_episodes=episodes,
            normalized_score=normalized_score(mean, self.config.env_name),
        )
        logger.info(
            "Policy %s: return %.9g ± %.9g, normalized score %.9g.",
            name,
            report.mean_return,
            report.std_return,
            report.normalized_score,
        )

        return report

    def evaluate(self, include_baselines: bool = False) -> list[EvaluationReport]:
        """
        Оценка обученной политики: точная ``J`` для конечного MDP, Монте-Карло в окружении ликвидации
        (все политики на одних и тех же эпизодах).

        :param include_baselines: Оценить также поведенческую политику и базовые стратегии
        :return:
        """

        policy = self.load_policy()
        reports: list[EvaluationReport] = []
        with self.phase("eval"):
            if self.config.track == Track.TABULAR:
                mdp = self.load_mdp()
                policies = {"policy": policy}
                if include_baselines:
                    policies["behavior"] = self.behavior(mdp)
                for name, candidate in policies.items():
                    value = expected_return(mdp, candidate)
                    logger.info("Policy %s: exact return %.9g.", name, value)
                    reports.append(EvaluationReport(policy=name, mean_return=value, exact=True))
            else:
                liquidation = self.config.liquidation
                rules: dict[str, ActionRule] = {"policy": SoftPolicyRule(policy, self.features)}
                if include_baselines:
                    rules["behavior"] = behavior_rule(liquidation)
                    rules.update(baseline_policies(liquidation, derive_seed(self.config.seed, TUNING)))
                reports = [self.rollout_report(name, rule) for name, rule in rules.items()]
        self.record({EVALUATION_NAME: self.run.save_evaluation(reports)})

        return reports

    def run_all(self, include_baselines: bool = False) -> list[EvaluationReport]:
        """
        Полный конвейер: данные, модели, политика, оценка.

        :param include_baselines: Оценить также базовые стратегии
        :return:
        """

        self.generate_data()
        self.train_dynamics()
        self.train_policy()

        return self.evaluate(include_baselines)


def run_ablation(
    config: ExperimentConfig,
    seeds: list[int],
    output_dir: Optional[Path] = None,
    variants: Optional[list[str]] = None,
) -> pd.DataFrame:
    """
    Обучение вариантов абляции на общих для каждого зерна данных и ансамбле.

    В каталоге ``seed_<n>`` лежат данные и ансамбль, в ``seed_<n>/<variant>`` – артефакты варианта.
    Итог – медианы оценок по зёрнам для каждого варианта.

    :param config: Конфигурация
    :param seeds: Главные зёрна
    :param output_dir: Корневой каталог абляции
    :param variants: Варианты; по умолчанию все
    :return: Сводка ``variant, median_return, median_score, n_seeds``
    """

    root = Path(output_dir or config.output_dir or PSPO_OUTPUT_DIR / f"{config.name}_ablation")
    names = variants or list(VARIANTS)
    rows = []
    for seed in seeds:
        seed_config = config.copy(update={"seed": seed})
        shared = root / f"seed_{seed}"
        inputs = ExperimentService(seed_config, shared)
        inputs.generate_data()
        inputs.train_dynamics()
        for name in names:
            logger.info("Ablation run: variant %s, seed %s.", name, seed)
            service = ExperimentService(with_variant(seed_config, name), shared / name, inputs_dir=shared)
            service.train_policy()
            report = service.evaluate()[0]
            rows.append(
                {
                    "variant": name,
                    "seed": seed,
                    "mean_return": report.mean_return,
                    "normalized_score": np.nan if report.normalized_score is None else report.normalized_score,
                }
            )

    runs = pd.DataFrame(rows)
    summary = (
        runs.groupby("variant", sort=False)
        .agg(
            median_return=("mean_return", "median"),
            median_score=("normalized_score", "median"),
            n_seeds=("seed", "nunique"),
        )
        .reset_index()
    )
    RunClient(root).write_frame(summary, ABLATION_SUMMARY_NAME)
    if "full" in names:
        full = float(summary.loc[summary["variant"] == "full", "median_return"].iloc[0])
        for row in summary.itertuples():
            if row.variant != "full" and row.median_return > full:
                logger.warning(
                    "Variant %s outperforms the full method: %.9g > %.9g.", row.variant, row.median_return, full
                )

    return summary
