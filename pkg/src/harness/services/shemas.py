"""
Описание моделей данных (DTO) для оркестрации экспериментов.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field

from app.settings import PSPO_N_EVAL_EPISODES
from liquidation.services.shemas import LiquidationConfig
from pspo.services.shemas import PspoConfig


class Track(str, Enum):
    """
    Тип эксперимента: случайные конечные MDP или задача ликвидации.
    """

    TABULAR = "tabular"
    LIQUIDATION = "liquidation"


class BehaviorKind(str, Enum):
    """
    Поведенческая политика табличного генератора данных.
    """

    UNIFORM = "uniform"
    RANDOM = "random"


class CheckSuite(str, Enum):
    """
    Наборы проверок теоретических свойств.
    """

    CONTRACTION = "contraction"
    VARIANCE = "variance"
    ROBBINS_MONRO = "robbins_monro"
    POSTERIOR = "posterior"
    CLOSED_FORM = "closed_form"
    MONOTONIC = "monotonic"
    TRUST_REGION = "trust_region"
    NON_EXPANSION = "non_expansion"
    CORRELATION = "correlation"


class TabularInstanceSpec(BaseModel):
    """
    Параметры генератора случайного конечного MDP.
    """

    n_states: int = Field(10, ge=1)
    n_actions: int = Field(3, ge=2)
    r_max: float = Field(1.0, gt=0.0)
    concentration: float = Field(1.0, gt=0.0)
    behavior: BehaviorKind = BehaviorKind.UNIFORM

    class Config:
        allow_mutation = False


class DatasetSpec(BaseModel):
    """
    Источник офлайн-данных: готовый файл или параметры генерации.
    """

    path: Optional[Path] = None
    n_records: int = Field(10_000, ge=1)
    episode_length: int = Field(50, ge=1)
    n_episodes: int = Field(2000, ge=1)

    class Config:
        allow_mutation = False


class ExperimentConfig(PspoConfig):
    """
    Конфигурация эксперимента. Гиперпараметры обучения лежат на верхнем уровне файла под своими именами,
    окружение ликвидации – в секции ``liquidation``.
    """

    name: str = "experiment"
    track: Track = Track.TABULAR
    seed: int = Field(0, ge=0)
    output_dir: Optional[Path] = None
    instance: TabularInstanceSpec = TabularInstanceSpec()
    dataset: DatasetSpec = DatasetSpec()
    liquidation: LiquidationConfig = LiquidationConfig()
    suites: list[CheckSuite] = list(CheckSuite)
    n_eval_episodes: int = Field(PSPO_N_EVAL_EPISODES, ge=1)
    env_name: str = "liquidation"
    ablation_seeds: list[int] = [0, 1, 2, 3]

    @property
    def pspo(self) -> PspoConfig:
        """
        Гиперпараметры обучения без полей эксперимента.

        :return:
        """

        return PspoConfig(**{name: getattr(self, name) for name in PspoConfig.__fields__})

    def snapshot(self) -> dict[str, Any]:
        """
        JSON-совместимый снимок конфигурации.

        :return:
        """

        return json.loads(self.json())


class CheckResult(BaseModel):
    """
    Результат набора проверок. ``passed=None`` – статистика измерена, критерий не применяется.
    """

    suite: CheckSuite
    passed: Optional[bool]
    statistics: dict[str, float] = {}
    message: str = ""


class EvaluationReport(BaseModel):
    """
    Оценка политики: точная ``J`` в табличном случае, среднее и разброс доходности методом Монте-Карло
    в окружении ликвидации.
    """

    policy: str
    mean_return: float
    std_return: float = 0.0
    n_episodes: int = 0
    normalized_score: Optional[float] = None
    exact: bool = False


class RunManifest(BaseModel):
    """
    Описание запуска: снимок конфигурации, хэши артефактов, итоги проверок и длительность фаз.
    """

    config: dict[str, Any]
    artifacts: dict[str, str] = {}
    checks: dict[str, Optional[bool]] = {}
    timings: dict[str, float] = {}
