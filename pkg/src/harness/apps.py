from django.apps import AppConfig


class HarnessAppConfig(AppConfig):
    name = "harness"
    verbose_name = "Оркестрация экспериментов"
