"""
Нормированная оценка результата относительно эталонных политик.
"""

from typing import Optional

from base.exceptions import ConfigurationError
from liquidation.clients.reference import ReferenceClient, ReferenceScores


def normalized_score(raw_return: float, env_name: str, references: Optional[ReferenceScores] = None) -> float:
    """
    ``100 * (raw - random) / (expert - random)``.

    :param raw_return: Средняя недисконтированная награда
    :param env_name: Название окружения в реестре
    :param references: Эталонные результаты; по умолчанию читаются из реестра
    :return:
    """

    if references is None:
        references = ReferenceClient().get_scores(env_name)
    if references.expert == references.random:
        raise ConfigurationError(f"expert and random references coincide for {env_name!r}")

    return 100.0 * (raw_return - references.random) / (references.expert - references.random)
