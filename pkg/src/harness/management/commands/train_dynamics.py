from typing import Any

from harness.management.commands._base import ExperimentCommand
from harness.services.pipeline import ExperimentService
from harness.services.shemas import ExperimentConfig


class Command(ExperimentCommand):
    """
    Реализация функций консольной команды.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    help = "Обучение ансамбля моделей динамики по офлайн-данным."

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        service = ExperimentService(config)
        ensemble = service.train_dynamics()
        self.stdout.write(f"Ensemble: {ensemble.size} {ensemble.kind.value} models in {service.output_dir}")
