from django.apps import AppConfig


class DynamicsAppConfig(AppConfig):
    name = "dynamics"
    verbose_name = "Ансамбль моделей динамики"
