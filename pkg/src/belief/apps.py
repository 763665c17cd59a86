from django.apps import AppConfig


class BeliefAppConfig(AppConfig):
    name = "belief"
    verbose_name = "Апостериорное распределение над моделями"
