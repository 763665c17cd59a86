"""
Подготовка данных для графиков: кривые обучения в длинном формате и пары для диаграммы рассеяния.
"""

import logging
import re
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from base.exceptions import ConfigurationError, MalformedCsvError
from harness.clients.run import RunClient
from harness.services.pipeline import METRICS_NAME, UNCERTAINTY_NAME

logger = logging.getLogger()

CURVES_NAME = "curves.csv"
SCATTER_NAME = "scatter.csv"
CURVE_COLUMNS = ["iteration", "metric", "value", "seed", "variant"]
SCATTER_COLUMNS = ["uncertainty", "td_target"]
# столбцы-идентификаторы, не являющиеся метриками
ID_COLUMNS = {"iteration", "seed", "variant"}

_LINE_PATTERN = re.compile(r"line (\d+)")


def read_csv_checked(path: Path, required: Sequence[str]) -> pd.DataFrame:
    """
    Чтение CSV с проверкой обязательных числовых столбцов. Номер строки в ошибке считается от единицы,
    заголовок – строка 1.

    :param path: Путь к файлу
    :param required: Обязательные числовые столбцы
    :return:
    """

    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as error:
        raise MalformedCsvError(str(path), None, "file is empty") from error
    except pd.errors.ParserError as error:
        logger.error("Cannot parse %s.", path, exc_info=True)
        match = _LINE_PATTERN.search(str(error))
        raise MalformedCsvError(str(path), int(match.group(1)) if match else None, str(error)) from error

    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise MalformedCsvError(str(path), 1, f"missing columns {missing}")
    for column in required:
        check_numeric(frame, path, column)

    return frame


def check_numeric(frame: pd.DataFrame, path: Path, column: str) -> None:
    """
    Приведение столбца к числам; первое нечисловое значение – ошибка с номером строки.

    :param frame: Таблица (изменяется на месте)
    :param path: Путь к файлу для сообщения
    :param column: Столбец
    :return:
    """

    values = pd.to_numeric(frame[column], errors="coerce")
    bad = (values.isna() & frame[column].notna()).to_numpy().nonzero()[0]
    if bad.size:
        raise MalformedCsvError(str(path), int(bad[0]) + 2, f"non-numeric value in column {column!r}")
    frame[column] = values


def read_metrics(path: Path) -> pd.DataFrame:
    """
    CSV отчётов итераций.

    :param path: Путь к файлу
    :return:
    """

    return read_csv_checked(path, ["iteration"])


def available_metrics(frame: pd.DataFrame) -> list[str]:
    return [
        column
        for column in frame.columns
        if column not in ID_COLUMNS and pd.api.types.is_numeric_dtype(frame[column]) and frame[column].notna().any()
    ]


def curve_frame(paths: Sequence[Path], metrics: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Кривые ``(iteration, metric, value, seed, variant)`` по нескольким CSV отчётов.

    :param paths: Файлы отчётов
    :param metrics: Метрики; ``None`` – все доступные
    :return:
    """

    frames = []
    for index, path in enumerate(paths):
        frame = read_metrics(path)
        if "seed" not in frame.columns:
            frame["seed"] = index
        if "variant" not in frame.columns:
            frame["variant"] = "full"
        frames.append(frame)
    if not frames:
        raise ConfigurationError("no metrics files given")

    combined = pd.concat(frames, ignore_index=True)
    available = available_metrics(combined)
    selected = available if metrics is None else list(metrics)
    if not selected:
        raise ConfigurationError(f"empty metric selection; available metrics: {', '.join(available)}")
    if unknown := [name for name in selected if name not in available]:
        raise ConfigurationError(f"unknown metrics {unknown}; available metrics: {', '.join(available)}")

    long = combined.melt(
        id_vars=["iteration", "seed", "variant"], value_vars=selected, var_name="metric", value_name="value"
    )

    return long.dropna(subset=["value"])[CURVE_COLUMNS].reset_index(drop=True)


def scatter_frame(paths: Sequence[Path]) -> pd.DataFrame:
    """
    Пары (неопределённость, TD-цель) из CSV диагностики.

    :param paths: Файлы пар
    :return:
    """

    frames = [read_csv_checked(path, SCATTER_COLUMNS)[SCATTER_COLUMNS] for path in paths]
    if not frames:
        return pd.DataFrame(columns=SCATTER_COLUMNS)

    return pd.concat(frames, ignore_index=True)


def resolve_inputs(paths: Sequence[Path]) -> tuple[list[Path], list[Path]]:
    """
    Файлы метрик и пар: каталог запуска раскрывается в ``metrics.csv`` и ``uncertainty.csv``,
    рядом с файлом метрик ищется файл пар.

    :param paths: Каталоги запусков или файлы метрик
    :return:
    """

    metrics, scatter = [], []
    for path in map(Path, paths):
        metrics_path = path / METRICS_NAME if path.is_dir() else path
        if not metrics_path.exists():
            raise ConfigurationError(f"metrics file {metrics_path} not found")
        metrics.append(metrics_path)
        if (uncertainty := metrics_path.parent / UNCERTAINTY_NAME).exists():
            scatter.append(uncertainty)

    return metrics, scatter


def export_plot_data(
    paths: Sequence[Path],
    output_dir: Path,
    metrics: Optional[Sequence[str]] = None,
) -> dict[str, Path]:
    """
    Запись ``curves.csv`` и ``scatter.csv``.

    :param paths: Каталоги запусков или файлы метрик
    :param output_dir: Каталог результата
    :param metrics: Метрики кривых
    :return:
    """

    metrics_paths, scatter_paths = resolve_inputs(paths)
    client = RunClient(output_dir)
    written = {CURVES_NAME: client.write_frame(curve_frame(metrics_paths, metrics), CURVES_NAME)}
    if scatter_paths:
        written[SCATTER_NAME] = client.write_frame(scatter_frame(scatter_paths), SCATTER_NAME)

    return written
