from pathlib import Path
from typing import Any

from django.core.management.base import CommandError, CommandParser

from harness.clients.run import RunClient
from harness.management.commands._base import EXIT_CHECK_FAILURE, EXIT_USAGE, ExperimentCommand
from harness.services.checks import CheckRunner
from harness.services.pipeline import ExperimentService
from harness.services.shemas import CheckSuite, ExperimentConfig


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Проверки свойств алгоритма; нарушения выводятся в отчёт, код завершения 1."

    argument_suite: str = "--suite"
    argument_quick: str = "--quick"
    argument_run_dir: str = "--run-dir"

    def add_arguments(self, parser: CommandParser) -> None:
        """
        Добавление аргументов для команды.

        :param parser: Объект парсера консольной команды.
        :return:
        """

        super().add_arguments(parser)
        parser.add_argument(
            self.argument_suite,
            nargs="+",
            default=None,
            help=f"Наборы проверок через пробел или запятую: {', '.join(suite.value for suite in CheckSuite)}",
        )
        parser.add_argument(self.argument_quick, action="store_true", help="Уменьшенное число задач и шагов")
        parser.add_argument(
            self.argument_run_dir,
            type=Path,
            default=None,
            help="Каталог обученного запуска для диагностики корреляции",
        )

    @staticmethod
    def suites(names: list[str]) -> list[CheckSuite]:
        try:
            return [CheckSuite(name) for value in names for name in value.split(",") if name]
        except ValueError as error:
            raise CommandError(str(error), returncode=EXIT_USAGE) from error

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        suites = self.suites(options["suite"]) if options.get("suite") else list(config.suites)
        service = ExperimentService(config)
        runner = CheckRunner(config, quick=bool(options.get("quick")), run_dir=options.get("run_dir"))
        results = runner.run(suites)
        for result in results:
            status = {True: "PASS", False: "FAIL", None: "INFO"}[result.passed]
            values = ", ".join(f"{name}={value:.9g}" for name, value in result.statistics.items())
            self.stdout.write(f"{status} {result.suite.value}: {values}")
        RunClient(service.output_dir).record(
            config.snapshot(), {}, checks={result.suite.value: result.passed for result in results}
        )

        failed = [result.suite.value for result in results if result.passed is False]
        if failed:
            raise CommandError(f"failed checks: {', '.join(failed)}", returncode=EXIT_CHECK_FAILURE)
