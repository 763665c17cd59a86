"""
Файлы каталога запуска: манифест, отчёт оценки и CSV-таблицы метрик.
"""

import hashlib
import logging
from pathlib import Path
from typing import Mapping, Optional

import pandas as pd

from app.settings import PSPO_FLOAT_FORMAT
from base.clients.base import BaseClient
from harness.services.shemas import EvaluationReport, RunManifest

logger = logging.getLogger()

MANIFEST_NAME = "manifest.json"
EVALUATION_NAME = "evaluation.json"


def file_sha256(path: Path) -> str:
    """
    SHA-256 содержимого файла.

    :param path: Путь к файлу
    :return:
    """

    digest = hashlib.sha256()
    with Path(path).open("rb") as stream:
        for chunk in iter(lambda: stream.read(1 << 20), b""):
            digest.update(chunk)

    return digest.hexdigest()


class RunClient(BaseClient):
    """
    Хранилище файлов одного запуска. Каждый запуск владеет своим каталогом.
    """

    def __init__(self, base_path: Path, float_format: str = PSPO_FLOAT_FORMAT) -> None:
        """
        Конструктор.

        :param base_path: Каталог запуска
        :param float_format: Формат чисел с плавающей точкой в CSV
        """

        self.base_path = Path(base_path)
        self.float_format = float_format

    def get_base_path(self) -> Path:
        return self.base_path

    def load_manifest(self) -> Optional[RunManifest]:
        """
        Чтение манифеста.

        :return:
        """

        if document := self._read(MANIFEST_NAME):
            return RunManifest.parse_obj(document)

        return None

    def record(
        self,
        config: dict,
        artifacts: Mapping[str, Path],
        timings: Optional[Mapping[str, float]] = None,
        checks: Optional[Mapping[str, Optional[bool]]] = None,
    ) -> Path:
        """
        Дополнение манифеста: снимок конфигурации заменяется, хэши, проверки и длительности фаз добавляются.

        :param config: Снимок конфигурации
        :param artifacts: Артефакты по именам
        :param timings: Длительности фаз, секунды
        :param checks: Итоги проверок
        :return:
        """

        manifest = self.load_manifest() or RunManifest(config=config)
        hashes = {name: file_sha256(path) for name, path in artifacts.items()}
        manifest = RunManifest(
            config=config,
            artifacts={**manifest.artifacts, **hashes},
            checks={**manifest.checks, **(checks or {})},
            timings={**manifest.timings, **(timings or {})},
        )

        return self._write(MANIFEST_NAME, manifest.dict())

    def save_evaluation(self, reports: list[EvaluationReport]) -> Path:
        """
        Сохранение отчёта оценки политик.

        :param reports: Оценки
        :return:
        """

        return self._write(EVALUATION_NAME, {"reports": [report.dict() for report in reports]})

    def write_frame(self, frame: pd.DataFrame, name: str) -> Path:
        """
        Запись таблицы в CSV с фиксированным форматом чисел.

        :param frame: Таблица
        :param name: Имя файла
        :return:
        """

        path = self.base_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=self.float_format)
        logger.info("Table written: %s (%s rows).", path, len(frame))

        return path
