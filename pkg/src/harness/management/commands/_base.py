import logging
from pathlib import Path
from typing import Any, Optional

from django.core.management.base import BaseCommand, CommandError, CommandParser

from base.exceptions import ConfigurationError, PspoError, UnknownEnvironmentError
from harness.services.config import load_experiment_config
from harness.services.shemas import ExperimentConfig

logger = logging.getLogger()

# коды завершения команд
EXIT_CHECK_FAILURE = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class ExperimentCommand(BaseCommand):
    """
    Общие аргументы команд эксперимента и перевод ошибок в коды завершения.

    https://docs.djangoproject.com/en/4.1/howto/custom-management-commands
    """

    argument_config: str = "--config"
    argument_seed: str = "--seed"
    argument_out: str = "--out"

    def add_arguments(self, parser: CommandParser) -> None:
        """
        Добавление аргументов для команды.

        :param parser: Объект парсера консольной команды.
        :return:
        """

        parser.add_argument(self.argument_config, type=Path, default=None, help="JSON-файл конфигурации")
        parser.add_argument(self.argument_seed, type=int, default=None, help="Главное зерно")
        parser.add_argument(self.argument_out, type=Path, default=None, help="Каталог запуска")

    @staticmethod
    def load_config(options: dict[str, Any]) -> ExperimentConfig:
        """
        Конфигурация с переопределениями из флагов.

        :param options: Опции консольной команды.
        :return:
        """

        overrides: dict[str, Any] = {}
        if options.get("seed") is not None:
            overrides["seed"] = options["seed"]
        if options.get("out") is not None:
            overrides["output_dir"] = str(options["out"])

        return load_experiment_config(options.get("config"), overrides=overrides)

    def handle(self, *args: tuple, **options: Any) -> None:
        """
        Выполнение консольной команды.
        https://docs.python.org/3/library/argparse.html#example

        :param args: Позиционные аргументы консольной команды.
        :param options: Опции консольной команды.
        :return:
        """

        try:
            self.run(self.load_config(options), options)
        except CommandError:
            raise
        except (ConfigurationError, UnknownEnvironmentError) as error:
            raise CommandError(str(error), returncode=EXIT_USAGE) from error
        except (PspoError, OSError, ValueError) as error:
            logger.error("Command failed.", exc_info=True)
            raise CommandError(str(error), returncode=EXIT_RUNTIME) from error

    def run(self, config: ExperimentConfig, options: dict[str, Any]) -> None:
        """
        Действие команды.

        :param config: Конфигурация эксперимента
        :param options: Опции консольной команды.
        :return:
        """

        raise NotImplementedError

    def report(self, message: str, *values: Optional[float]) -> None:
        """
        Вывод строки с числами в 9 значащих цифр.

        :param message: Шаблон с ``{}`` на месте чисел
        :param values: Числа
        :return:
        """

        self.stdout.write(message.format(*("-" if value is None else f"{value:.9g}" for value in values)))
