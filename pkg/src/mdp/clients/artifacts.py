"""
Функции для чтения и записи артефактов конечного MDP: самого MDP, политик и Q-функций.
"""

from pathlib import Path
from typing import Optional

from base.clients.base import BaseClient
from base.exceptions import ConfigurationError
from mdp.services.shemas import QFunction, SoftPolicy, TabularMdp


class ArtifactClient(BaseClient):
    """
    Хранилище JSON-артефактов в каталоге запуска.
    """

    def __init__(self, base_path: Path) -> None:
        """
        Конструктор.

        :param base_path: Каталог артефактов
        """

        self.base_path = Path(base_path)

    def get_base_path(self) -> Path:
        return self.base_path

    def save_mdp(self, mdp: TabularMdp, name: str = "mdp.json") -> Path:
        """
        Сохранение MDP.

        :param mdp: MDP
        :param name: Имя файла
        :return:
        """

        return self._write(name, {"kind": "tabular_mdp", **mdp.to_document()})

    def load_mdp(self, name: str = "mdp.json") -> Optional[TabularMdp]:
        """
        Загрузка MDP.

        :param name: Имя файла
        :return:
        """

        if document := self._read(name):
            self._check_kind(document, "tabular_mdp", name)
            return TabularMdp.parse_obj(document)

        return None

    def save_policy(self, policy: SoftPolicy, name: str = "policy.json") -> Path:
        """
        Сохранение политики.

        :param policy: Политика
        :param name: Имя файла
        :return:
        """

        return self._write(name, {"kind": "soft_policy", **policy.to_document()})

    def load_policy(self, name: str = "policy.json") -> Optional[SoftPolicy]:
        """
        Загрузка политики.

        :param name: Имя файла
        :return:
        """

        if document := self._read(name):
            self._check_kind(document, "soft_policy", name)
            return SoftPolicy.parse_obj(document)

        return None

    def save_q(self, q: QFunction, name: str = "q.json") -> Path:
        """
        Сохранение Q-функции.

        :param q: Q-функция
        :param name: Имя файла
        :return:
        """

        return self._write(name, {"kind": "q_function", **q.to_document()})

    def load_q(self, name: str = "q.json") -> Optional[QFunction]:
        """
        Загрузка Q-функции.

        :param name: Имя файла
        :return:
        """

        if document := self._read(name):
            self._check_kind(document, "q_function", name)
            return QFunction.parse_obj(document)

        return None

    @staticmethod
    def _check_kind(document: dict, kind: str, name: str) -> None:
        if document.get("kind") != kind:
            raise ConfigurationError(f"artifact '{name}' has kind {document.get('kind')!r}, expected {kind!r}")
