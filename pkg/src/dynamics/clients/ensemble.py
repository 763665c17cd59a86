"""
Функции для чтения и записи обученного ансамбля моделей динамики.
"""

from pathlib import Path
from typing import Optional

from base.clients.base import BaseClient
from dynamics.services.shemas import CategoricalModel, DynamicsModel, GaussianModel, ModelEnsemble, ModelKind
from mdp.services.features import build_feature_map


class EnsembleClient(BaseClient):
    """
    Хранилище ансамбля в формате JSON: тип, параметры моделей, пул, индексы активных моделей
    и параметры признакового отображения.
    """

    def __init__(self, base_path: Path) -> None:
        """
        Конструктор.

        :param base_path: Каталог артефактов
        """

        self.base_path = Path(base_path)

    def get_base_path(self) -> Path:
        return self.base_path

    def save(self, ensemble: ModelEnsemble, name: str = "ensemble.json") -> Path:
        """
        Сохранение ансамбля.

        :param ensemble: Ансамбль
        :param name: Имя файла
        :return:
        """

        return self._write(name, ensemble.to_document())

    def load(self, name: str = "ensemble.json") -> Optional[ModelEnsemble]:
        """
        Загрузка ансамбля.

        :param name: Имя файла
        :return:
        """

        if not (document := self._read(name)):
            return None

        kind = ModelKind(document["kind"])
        pool = None if document.get("pool") is None else [self._model(kind, item) for item in document["pool"]]
        feature_map = None if document.get("feature_map") is None else build_feature_map(document["feature_map"])

        return ModelEnsemble(
            kind=kind,
            members=[self._model(kind, item) for item in document["members"]],
            pool=pool,
            active_indices=document.get("active_indices"),
            feature_map=feature_map,
        )

    @staticmethod
    def _model(kind: ModelKind, document: dict) -> DynamicsModel:
        if kind == ModelKind.CATEGORICAL:
            return CategoricalModel.parse_obj(document)

        return GaussianModel.parse_obj(document)
