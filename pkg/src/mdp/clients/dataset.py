"""
Чтение и запись наборов переходов в формате NDJSON (одна запись на строку).
"""

import json
import logging
from pathlib import Path

from pydantic import ValidationError

from base.exceptions import MalformedDatasetError
from mdp.services.shemas import OfflineDataset, Provenance, StateKind, TransitionRecord

logger = logging.getLogger()


class DatasetClient:
    """
    Файловое хранилище наборов переходов.

    Формат строки: ``{"s": ..., "a": ..., "r": ..., "s2": ..., "done": ..., "provenance": "real"|"synthetic"}``.
    Дискретные состояния записываются целыми числами, непрерывные – списками.
    """

    def __init__(self, path: Path) -> None:
        """
        Конструктор.

        :param path: Путь к файлу набора данных
        """

        self.path = Path(path)

    def write(self, dataset: OfflineDataset) -> Path:
        """
        Запись набора. Ключи сортируются, числа пишутся с полной точностью.

        :param dataset: Набор переходов
        :return:
        """

        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", encoding="utf-8") as stream:
            for record in dataset.records():
                row = {
                    "s": record.state if isinstance(record.state, int) else list(record.state),
                    "a": record.action,
                    "r": record.reward,
                    "s2": record.next_state if isinstance(record.next_state, int) else list(record.next_state),
                    "done": record.done,
                    "provenance": record.provenance.value,
                }
                stream.write(json.dumps(row, sort_keys=True))
                stream.write("\n")
        logger.info("Dataset written: %s (%s records).", self.path, len(dataset))

        return self.path

    def read(self) -> OfflineDataset:
        """
        Чтение набора.

        :return:
        """

        records = []
        with self.path.open("r", encoding="utf-8") as stream:
            for line_number, line in enumerate(stream, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    records.append(
                        TransitionRecord(
                            state=self._state(row["s"]),
                            action=row["a"],
                            reward=row["r"],
                            next_state=self._state(row["s2"]),
                            done=row["done"],
                            provenance=Provenance(row["provenance"]),
                        )
                    )
                except (KeyError, TypeError, ValueError, ValidationError) as error:
                    logger.error("Error during dataset parsing.", exc_info=True)
                    raise MalformedDatasetError(str(self.path), line_number, str(error)) from error

        kind = StateKind.DISCRETE if records and isinstance(records[0].state, int) else StateKind.CONTINUOUS
        logger.info("Dataset read: %s (%s records).", self.path, len(records))

        return OfflineDataset.from_records(records, kind=kind)

    @staticmethod
    def _state(value: object) -> object:
        if isinstance(value, list):
            return tuple(float(item) for item in value)

        return int(value)  # type: ignore[call-overload]
