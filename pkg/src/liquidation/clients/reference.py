"""
Реестр эталонных результатов (случайная и экспертная политики) для нормированной оценки.
"""

from pathlib import Path

from pydantic import BaseModel

from app.settings import PSPO_REFERENCE_SCORES
from base.clients.base import BaseClient
from base.exceptions import UnknownEnvironmentError


class ReferenceScores(BaseModel):
    """
    Эталонные результаты окружения.
    """

    random: float
    expert: float


class ReferenceClient(BaseClient):
    """
    Чтение реестра эталонных результатов из JSON ``{env: {"random": ..., "expert": ...}}``.
    """

    def __init__(self, path: Path = PSPO_REFERENCE_SCORES) -> None:
        """
        Конструктор.

        :param path: Путь к файлу реестра
        """

        self.path = Path(path)

    def get_base_path(self) -> Path:
        return self.path.parent

    def get_scores(self, env_name: str) -> ReferenceScores:
        """
        Эталонные результаты окружения.

        :param env_name: Название окружения
        :return:
        """

        registry = self._read(self.path.name) or {}
        if env_name not in registry:
            raise UnknownEnvironmentError(f"no reference scores registered for {env_name!r}")

        return ReferenceScores.parse_obj(registry[env_name])
