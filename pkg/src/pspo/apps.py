from django.apps import AppConfig


class PspoAppConfig(AppConfig):
    name = "pspo"
    verbose_name = "Оптимизация политики с апостериорным сэмплированием"
