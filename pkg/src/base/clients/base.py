"""
Базовые функции для клиентов хранилища артефактов.
"""

import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional

logger = logging.getLogger()


class BaseClient(ABC):
    """
    Базовый класс, реализующий интерфейс для клиентов файловых артефактов.
    """

    @abstractmethod
    def get_base_path(self) -> Path:
        """
        Получение базового каталога артефактов.

        :return:
        """

    def _read(self, name: str) -> Optional[dict]:
        """
        Чтение JSON-документа.

        :param name: Имя файла относительно базового каталога
        :return:
        """

        path = self.get_base_path() / name
        if not path.exists():
            logger.info("Artifact '%s' not found.", path)
            return None

        with path.open("r", encoding="utf-8") as stream:
            return json.load(stream)

    def _write(self, name: str, document: dict) -> Path:
        """
        Запись JSON-документа с отсортированными ключами (повторный запуск даёт идентичный файл).

        :param name: Имя файла относительно базового каталога
        :param document: Документ
        :return:
        """

        path = self.get_base_path() / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as stream:
            json.dump(document, stream, sort_keys=True, indent=1)
            stream.write("\n")

        return path
