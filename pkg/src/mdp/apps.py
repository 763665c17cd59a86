from django.apps import AppConfig


class MdpAppConfig(AppConfig):
    name = "mdp"
    verbose_name = "Конечные MDP и оракулы"
