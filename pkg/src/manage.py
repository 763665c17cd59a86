#!/usr/bin/env python
"""
Запуск консольных команд экспериментов: ``python manage.py <команда> [аргументы]``.

Список команд: ``python manage.py help``.
"""
import os
import sys


def main() -> None:
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "app.settings")
    try:
        from django.core.management import (  # pylint: disable=C0415
            execute_from_command_line,
        )
    except ImportError as exc:
        raise ImportError("Django is not installed; run `pip install -r requirements.txt`.") from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
