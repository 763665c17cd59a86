"""
Загрузка конфигурации эксперимента из JSON-файла с переопределениями из переменных окружения.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional

from pydantic import ValidationError

from base.exceptions import ConfigurationError
from harness.services.shemas import ExperimentConfig

logger = logging.getLogger()

# префикс переопределений: PSPO__ALPHA=0.5, PSPO__LIQUIDATION__HORIZON=50
ENV_PREFIX = "PSPO__"
ENV_SEPARATOR = "__"


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def _set_nested(document: dict[str, Any], keys: list[str], value: Any) -> None:
    for key in keys[:-1]:
        section = document.get(key)
        if not isinstance(section, dict):
            section = document[key] = {}
        document = section
    document[keys[-1]] = value


def environment_overrides(environ: Mapping[str, str]) -> dict[str, Any]:
    """
    Переопределения вида ``PSPO__<KEY>[__<SUBKEY>]=value``. Значение разбирается как JSON,
    иначе остаётся строкой; приведение типов выполняет валидация конфигурации.

    :param environ: Переменные окружения
    :return: Вложенный словарь переопределений
    """

    overrides: dict[str, Any] = {}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        keys = [key.lower() for key in name[len(ENV_PREFIX) :].split(ENV_SEPARATOR)]
        if not all(keys):
            raise ConfigurationError(f"malformed override variable {name!r}")
        _set_nested(overrides, keys, _parse_value(environ[name]))
        logger.info("Config override from environment: %s.", name)

    return overrides


def merge_documents(base: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """
    Рекурсивное слияние словарей; значения ``overrides`` имеют приоритет.

    :param base: Исходный документ
    :param overrides: Переопределения
    :return: Новый документ
    """

    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = merge_documents(merged[key], value)
        else:
            merged[key] = value

    return merged


def read_config_document(path: Path) -> dict[str, Any]:
    """
    Чтение JSON-документа конфигурации.

    :param path: Путь к файлу
    :return:
    """

    try:
        with Path(path).open("r", encoding="utf-8") as stream:
            document = json.load(stream)
    except OSError as error:
        raise ConfigurationError(f"cannot read config {path}: {error}") from error
    except ValueError as error:
        raise ConfigurationError(f"config {path} is not valid JSON: {error}") from error
    if not isinstance(document, dict):
        raise ConfigurationError(f"config {path} must contain a JSON object")

    return document


def load_experiment_config(
    path: Optional[Path] = None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Конфигурация эксперимента: значения по умолчанию, затем файл, затем переменные окружения,
    затем явные переопределения (флаги командной строки).

    :param path: Путь к JSON-файлу или ``None``
    :param environ: Переменные окружения; по умолчанию окружение процесса
    :param overrides: Явные переопределения
    :return:
    """

    document = read_config_document(path) if path is not None else {}
    document = merge_documents(document, environment_overrides(os.environ if environ is None else environ))
    document = merge_documents(document, overrides or {})

    try:
        return ExperimentConfig.parse_obj(document)
    except ValidationError as error:
        raise ConfigurationError(f"invalid experiment config: {error}") from error
