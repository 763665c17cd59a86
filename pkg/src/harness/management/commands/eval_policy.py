from typing import Any

from django.core.management.base import CommandParser

from harness.management.commands._base import ExperimentCommand
from harness.services.pipeline import ExperimentService
from harness.services.shemas import ExperimentConfig


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Оценка обученной политики: точная для конечного MDP, методом Монте-Карло для ликвидации."

    argument_baselines: str = "--baselines"

    def add_arguments(self, parser: CommandParser) -> None:
        """
        Добавление аргументов для команды.

        :param parser: Объект парсера консольной команды.
        :return:
        """

        super().add_arguments(parser)
        parser.add_argument(
            self.argument_baselines,
            action="store_true",
            help="Оценить также поведенческую политику и базовые стратегии",
        )

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        for report in ExperimentService(config).evaluate(include_baselines=bool(options.get("baselines"))):
            if report.exact:
                self.report(f"{report.policy}: exact return {{}}", report.mean_return)
            else:
                self.report(
                    f"{report.policy}: return {{}} ± {{}} over {report.n_episodes} episodes, normalized score {{}}",
                    report.mean_return,
                    report.std_return,
                    report.normalized_score,
                )
