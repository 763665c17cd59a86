import math
from typing import Any

from django.core.management.base import CommandParser

from harness.management.commands._base import ExperimentCommand
from harness.services.pipeline import VARIANTS, run_ablation
from harness.services.shemas import ExperimentConfig


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Абляции: обучение вариантов на нескольких зёрнах и сводка медиан."

    argument_variant: str = "--variant"
    argument_seeds: str = "--seeds"

    def add_arguments(self, parser: CommandParser) -> None:
        """
        Добавление аргументов для команды.

        :param parser: Объект парсера консольной команды.
        :return:
        """

        super().add_arguments(parser)
        parser.add_argument(
            self.argument_variant,
            action="append",
            choices=list(VARIANTS),
            default=None,
            help="Вариант (можно повторять); по умолчанию все",
        )
        parser.add_argument(self.argument_seeds, type=int, nargs="+", default=None, help="Главные зёрна")

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        seeds = options.get("seeds") or config.ablation_seeds
        summary = run_ablation(config, seeds, variants=options.get("variant"))
        for row in summary.itertuples():
            self.report(
                f"{row.variant}: median return {{}}, median score {{}} over {row.n_seeds} seeds",
                row.median_return,
                None if math.isnan(row.median_score) else row.median_score,
            )
