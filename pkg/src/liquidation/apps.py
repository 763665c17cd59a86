from django.apps import AppConfig


class LiquidationAppConfig(AppConfig):
    name = "liquidation"
    verbose_name = "Окружение оптимальной ликвидации"

    def ready(self) -> None:
        # регистрация признакового отображения для восстановления сохранённых моделей
        from liquidation.services.features import (  # pylint: disable=import-outside-toplevel
            FEATURE_MAP_ID,
            LiquidationFeatures,
        )
        from mdp.services.features import register_feature_map  # pylint: disable=import-outside-toplevel

        register_feature_map(FEATURE_MAP_ID, LiquidationFeatures.from_document)
