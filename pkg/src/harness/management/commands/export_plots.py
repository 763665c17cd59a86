from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from harness.management.commands._base import ExperimentCommand
from harness.services.pipeline import ExperimentService
from harness.services.plots import export_plot_data
from harness.services.shemas import ExperimentConfig


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Данные для графиков: кривые в длинном формате и пары для диаграммы рассеяния."

    argument_paths: str = "paths"
    argument_metric: str = "--metric"

    def add_arguments(self, parser: CommandParser) -> None:
        """
        Добавление аргументов для команды.

        :param parser: Объект парсера консольной команды.
        :return:
        """

        super().add_arguments(parser)
        parser.add_argument(self.argument_paths, type=Path, nargs="+", help="Каталоги запусков или CSV метрик")
        parser.add_argument(
            self.argument_metric,
            action="append",
            default=None,
            help="Метрика кривой (можно повторять); по умолчанию все",
        )

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        metrics = None
        if options.get("metric") is not None:
            metrics = [name for value in options["metric"] for name in value.split(",") if name]
        written = export_plot_data(options["paths"], ExperimentService(config).output_dir, metrics)
        for name, path in written.items():
            self.stdout.write(f"{name}: {path}")
