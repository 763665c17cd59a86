"""
Django settings for project.

The project is used as a command-line workbench: management commands only,
no database and no HTTP surface.

For more information on this file, see
https://docs.djangoproject.com/en/4.1/topics/settings/
"""

import sys
from pathlib import Path

import environ

BASE_DIR = Path(__file__).resolve().parent.parent
ROOT_DIR = environ.Path(__file__) - 3

env = environ.Env(
    SECRET_KEY=(str, "pspo-workbench-insecure-key"),
    DEBUG=(bool, False),
    LOG_LEVEL=(str, "INFO"),
    PSPO_OUTPUT_DIR=(str, "runs"),
    PSPO_REFERENCE_SCORES=(str, str(BASE_DIR / "liquidation" / "data" / "reference_scores.json")),
    PSPO_N_EVAL_EPISODES=(int, 100),
    PSPO_FLOAT_FORMAT=(str, "%.9g"),
)
env.read_env(ROOT_DIR(".env"))

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = env("SECRET_KEY")

DEBUG = env("DEBUG")

ALLOWED_HOSTS: list[str] = []

# Application definition

INSTALLED_APPS = [
    "mdp.apps.MdpAppConfig",
    "belief.apps.BeliefAppConfig",
    "dynamics.apps.DynamicsAppConfig",
    "pspo.apps.PspoAppConfig",
    "liquidation.apps.LiquidationAppConfig",
    "harness.apps.HarnessAppConfig",
]

# без базы данных: команды работают только с файлами артефактов
DATABASES: dict = {}

USE_I18N = True
LANGUAGE_CODE = "ru-RU"

USE_TZ = True
TIME_ZONE = "Europe/Moscow"

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# настройки логирования
LOG_LEVEL = env("LOG_LEVEL")
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "%(asctime)s %(name)-12s %(levelname)-8s %(message)s",
        },
    },
    "handlers": {
        "console": {
            "level": LOG_LEVEL,
            "class": "logging.StreamHandler",
            "stream": sys.stdout,
            "formatter": "verbose",
        },
    },
    "loggers": {
        "": {
            "level": LOG_LEVEL,
            "handlers": ["console"],
        }
    },
}

# каталог запусков по умолчанию
PSPO_OUTPUT_DIR = Path(env("PSPO_OUTPUT_DIR"))
# реестр эталонных результатов для нормированной оценки
PSPO_REFERENCE_SCORES = Path(env("PSPO_REFERENCE_SCORES"))
# число эпизодов оценки политики в окружении
PSPO_N_EVAL_EPISODES: int = env.int("PSPO_N_EVAL_EPISODES")
# формат чисел с плавающей точкой в CSV и консоли
PSPO_FLOAT_FORMAT: str = env("PSPO_FLOAT_FORMAT")
