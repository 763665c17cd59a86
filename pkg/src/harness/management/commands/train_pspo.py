from typing import Any

from django.core.management.base import CommandError, CommandParser

from harness.management.commands._base import EXIT_CHECK_FAILURE, ExperimentCommand
from harness.services.pipeline import VARIANTS, ExperimentService, with_variant
from harness.services.shemas import ExperimentConfig
from pspo.services.shemas import IterationReport

# период вывода прогресса, итерации
PROGRESS_EVERY = 10


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Обучение политики; сохраняются политика, Q-функция и CSV отчётов итераций."

    argument_variant: str = "--variant"

    def add_arguments(self, parser: CommandParser) -> None:
        """
        Добавление аргументов для команды.

        :param parser: Объект парсера консольной команды.
        :return:
        """

        super().add_arguments(parser)
        parser.add_argument(self.argument_variant, choices=list(VARIANTS), default=None, help="Вариант абляции")

    def progress(self, report: IterationReport) -> None:
        if report.iteration % PROGRESS_EVERY == 0:
            self.report(
                f"Iteration {report.iteration}: J~ {{}}, KL {{}}, target variance {{}}",
                report.regularized_return,
                report.kl_step,
                report.target_variance,
            )

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        if options.get("variant"):
            config = with_variant(config, options["variant"])
        service = ExperimentService(config)
        result = service.train_policy(callback=self.progress)
        self.stdout.write(f"Variant {config.variant}: {len(result.reports)} iterations in {service.output_dir}")

        violations = []
        if not service.variance_ok(result):
            violations.append("variance bound")
        if not service.trust_region_ok(result):
            violations.append("trust region")
        if violations:
            raise CommandError(
                f"invariant violations during training: {', '.join(violations)}", returncode=EXIT_CHECK_FAILURE
            )
