"""
Описание моделей данных (DTO) задачи оптимальной ликвидации позиции.
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, validator

# индекс действия "держать"
HOLD_ACTION = 0


class TerminalRule(str, Enum):
    """
    Судьба неконвертированного остатка на последнем шаге.
    """

    EXPIRE_WORTHLESS = "expire_worthless"
    FORCE_LIQUIDATE = "force_liquidate"


class OuParams(BaseModel):
    """
    Параметры процесса Орнштейна–Уленбека для обменного курса и начального курса.
    """

    theta: float = Field(0.05, gt=0.0)
    mu_rate: float = 1.5
    sigma: float = Field(0.2, ge=0.0)
    dt: float = Field(1.0, gt=0.0)
    p0_mean: float = 1.0
    p0_std: float = Field(0.05, ge=0.0)

    class Config:
        allow_mutation = False

    @property
    def decay(self) -> float:
        return float(np.exp(-self.theta * self.dt))

    @property
    def step_std(self) -> float:
        return float(self.sigma * np.sqrt((1.0 - np.exp(-2.0 * self.theta * self.dt)) / (2.0 * self.theta)))

    @property
    def stationary_variance(self) -> float:
        return self.sigma**2 / (2.0 * self.theta)


class LiquidationConfig(BaseModel):
    """
    Параметры окружения: горизонт, начальный объём, сетка действий, правило завершения,
    параметры курса и поведенческой политики.

    Сетка действий начинается с действия "держать" (доля 0), далее строго возрастающие доли конвертации,
    последняя равна 1.
    """

    horizon: int = Field(100, gt=0)
    initial_inventory: float = Field(100.0, gt=0.0)
    action_grid: list[float] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    terminal_rule: TerminalRule = TerminalRule.EXPIRE_WORTHLESS
    ou: OuParams = OuParams()
    behavior_hold_prob: float = Field(0.8, ge=0.0, le=1.0)
    rate_cap: float = Field(3.0, gt=0.0)

    class Config:
        allow_mutation = False

    @validator("action_grid")
    def _grid(cls, value: list[float]) -> list[float]:  # pylint: disable=no-self-argument
        if len(value) < 2 or value[HOLD_ACTION] != 0.0:
            raise ValueError("action_grid must start with the hold action (0.0) and contain a convert fraction")
        fractions = np.asarray(value[1:])
        if np.any(fractions <= 0.0) or np.any(np.diff(fractions) <= 0.0) or fractions[-1] != 1.0:
            raise ValueError("convert fractions must be strictly increasing in (0, 1] and end with 1.0")

        return value

    @property
    def n_actions(self) -> int:
        return len(self.action_grid)

    @property
    def fractions(self) -> np.ndarray:
        return np.asarray(self.action_grid, dtype=np.float64)

    @property
    def r_max(self) -> float:
        """
        Граница награды за шаг: весь объём по максимальному курсу.
        """

        return self.initial_inventory * self.rate_cap


class LiquidationState(BaseModel):
    """
    Состояние ``(t, m, p)``: номер шага, остаток валюты A, обменный курс.
    """

    t: int = Field(ge=0)
    inventory: float = Field(ge=0.0)
    rate: float = Field(ge=0.0)

    class Config:
        allow_mutation = False

    def as_array(self) -> np.ndarray:
        return np.array([float(self.t), self.inventory, self.rate])

    @classmethod
    def from_array(cls, row: np.ndarray) -> "LiquidationState":
        return cls(t=int(round(row[0])), inventory=float(row[1]), rate=float(row[2]))
