from typing import Any

from harness.management.commands._base import ExperimentCommand
from harness.services.pipeline import ExperimentService
from harness.services.shemas import ExperimentConfig


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Генерация офлайн-данных поведенческой политикой."

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        service = ExperimentService(config)
        dataset = service.generate_data()
        self.stdout.write(f"Dataset: {service.output_dir} ({len(dataset)} records)")
