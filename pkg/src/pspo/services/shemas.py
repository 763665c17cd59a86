"""
Описание моделей данных (DTO) алгоритма: конфигурация, расписание шага и отчёты итераций.
"""

import math
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, Field, root_validator

from mdp.services.shemas import ValueMode

# значение alpha в абляции без регуляризации с alpha -> 0
ALPHA_ZERO = 1e-6


class ScheduleKind(str, Enum):
    """
    Тип расписания шага стохастической аппроксимации.
    """

    ROBBINS_MONRO = "robbins_monro"
    CONSTANT = "constant"


class EvaluationSolver(str, Enum):
    """
    Способ оценки Q в табличном случае: точное решение или стохастическая аппроксимация.
    """

    EXACT = "exact"
    STOCHASTIC = "stochastic"


class BeliefRule(str, Enum):
    """
    Правило обновления апостериорного распределения.
    """

    CONSISTENCY = "consistency"
    LIKELIHOOD = "likelihood"


class TrustRegionAggregation(str, Enum):
    """
    Агрегирование KL по состояниям в ограничении доверительной области.
    """

    MAX = "max"
    OCCUPANCY_MEAN = "occupancy_mean"


class NoRegularizationMode(str, Enum):
    """
    Вариант абляции без регуляризации: равномерная опорная политика или ``alpha -> 0``.
    """

    UNIFORM_MU = "uniform_mu"
    ALPHA_ZERO = "alpha_zero"


class LearningRateSchedule(BaseModel):
    """
    Расписание ``eta_t = c / (t + t0)`` (Роббинс–Монро) или ``eta_t = c``.

    Для Роббинса–Монро при ``c > 0`` и ``t0 >= 1`` сумма шагов расходится, а сумма квадратов сходится.
    """

    kind: ScheduleKind = ScheduleKind.ROBBINS_MONRO
    c: float = Field(1.0, ge=0.0)
    t0: float = Field(1.0, ge=1.0)

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["kind"] == ScheduleKind.ROBBINS_MONRO and values["c"] <= 0.0:
            raise ValueError("robbins_monro schedule requires c > 0")
        if values["kind"] == ScheduleKind.CONSTANT and values["c"] > 1.0:
            raise ValueError("constant step must lie in [0, 1]")

        return values

    def rate(self, step: int) -> float:
        """
        Шаг на итерации ``step`` (с нуля); не больше 1.

        :param step: Номер шага
        :return:
        """

        if self.kind == ScheduleKind.CONSTANT:
            return self.c

        return min(self.c / (step + self.t0), 1.0)


class PspoConfig(BaseModel):
    """
    Гиперпараметры обучения. Имена ключей файла конфигурации совпадают с именами полей.
    """

    alpha: float = Field(1.0, gt=0.0)
    epsilon_trust: float = Field(0.01, gt=0.0)
    beta: float = Field(1.0, ge=0.0)
    gamma: float = Field(0.99, ge=0.0, lt=1.0)
    ensemble_size: int = Field(10, ge=1)
    model_pool_size: int = Field(10, ge=1)
    schedule: LearningRateSchedule = LearningRateSchedule()
    polyak: float = Field(0.005, gt=0.0, le=1.0)
    iterations: int = Field(100, ge=0)
    rollout_horizon: int = Field(5, ge=1)
    real_ratio: float = Field(0.5, ge=0.0, le=1.0)
    belief_update_every: int = Field(1, ge=1)
    batch_size: int = Field(256, ge=1)
    n_rollouts: int = Field(128, ge=0)
    evaluation_mode: ValueMode = ValueMode.OPTIMALITY
    evaluation_solver: EvaluationSolver = EvaluationSolver.EXACT
    stochastic_steps: int = Field(200, ge=1)
    belief_rule: BeliefRule = BeliefRule.CONSISTENCY
    trust_region_aggregation: TrustRegionAggregation = TrustRegionAggregation.MAX
    behavior_smoothing: float = Field(1e-3, ge=0.0)
    dynamics_smoothing: float = Field(1e-3, ge=0.0)
    dynamics_epochs: int = Field(1000, ge=1)
    dynamics_learning_rate: float = Field(1e-2, gt=0.0, le=0.5)
    n_next_samples: int = Field(8, ge=1)
    critic_ridge: float = Field(1e-6, ge=0.0)
    check_improvement: bool = False
    fd_step: float = Field(1e-4, ge=1e-6, le=1e-3)
    average_utilization: bool = False
    without_regularization: bool = False
    ablation_no_reg_mode: NoRegularizationMode = NoRegularizationMode.UNIFORM_MU

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def _invariants(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        if values["ensemble_size"] > values["model_pool_size"]:
            raise ValueError("ensemble_size must not exceed model_pool_size")

        return values

    @property
    def variant(self) -> str:
        """
        Метка варианта абляции.
        """

        if self.average_utilization and self.without_regularization:
            return f"average_utilization+without_regularization_{self.ablation_no_reg_mode.value}"
        if self.average_utilization:
            return "average_utilization"
        if self.without_regularization:
            return f"without_regularization_{self.ablation_no_reg_mode.value}"

        return "full"

    @property
    def effective_alpha(self) -> float:
        if self.without_regularization and self.ablation_no_reg_mode == NoRegularizationMode.ALPHA_ZERO:
            return ALPHA_ZERO

        return self.alpha

    @property
    def uniform_reference(self) -> bool:
        return self.without_regularization and self.ablation_no_reg_mode == NoRegularizationMode.UNIFORM_MU

    @property
    def improvement_alpha(self) -> float:
        """
        Сила KL к ``mu`` в шаге улучшения; с равномерной опорной политикой штраф снимается
        и остаётся только наклон с множителем ``lambda``.
        """

        return 0.0 if self.uniform_reference else self.effective_alpha


class IterationReport(BaseModel):
    """
    Наблюдаемые величины одной итерации обучения.

    ``regularized_return`` – регуляризованная цель ``J~`` новой политики (точная на смеси моделей
    в табличном случае, оценка по пакету в непрерывном). ``mixture_return_before/after`` – ``J`` политик
    до и после шага на MDP-смеси текущей итерации. ``exact_return`` – ``J`` новой политики в истинном MDP.
    """

    iteration: int
    variant: str = "full"
    prior: list[float]
    posterior: list[float]
    beta: float
    mean_target: float
    target_variance: float
    variance_bound: float
    variance_ok: bool
    regularized_return: float
    regularized_return_before: Optional[float] = None
    exact_return: Optional[float] = None
    mixture_return_before: Optional[float] = None
    mixture_return_after: Optional[float] = None
    monotonic: Optional[bool] = None
    condition_holds: Optional[bool] = None
    condition_lhs: Optional[float] = None
    condition_rhs: Optional[float] = None
    kl_step: float = Field(ge=0.0)
    trust_region_ok: bool
    lambda_used: float = Field(ge=0.0)
    n_synthetic: int = 0
    uncertainty_td_spearman: Optional[float] = None

    @root_validator(skip_on_failure=True)
    def _finite(cls, values: dict) -> dict:  # pylint: disable=no-self-argument
        for name, value in values.items():
            if isinstance(value, float) and name != "uncertainty_td_spearman" and not math.isfinite(value):
                raise ValueError(f"non-finite {name} in iteration report")

        return values

    def to_row(self) -> dict[str, Any]:
        """
        Плоская строка CSV: веса моделей разворачиваются в столбцы ``prior_i`` и ``posterior_i``.

        :return:
        """

        row = self.dict(exclude={"prior", "posterior"})
        row.update({f"prior_{index}": value for index, value in enumerate(self.prior)})
        row.update({f"posterior_{index}": value for index, value in enumerate(self.posterior)})

        return row
