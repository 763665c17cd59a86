"""
Вывод зёрен компонентов эксперимента из главного зерна.
"""

import zlib

import numpy as np

# названия компонентов, для которых выводятся зёрна
INSTANCE = "instance"
BEHAVIOR = "behavior"
DATASET = "dataset"
DYNAMICS = "dynamics"
ACTIVE = "active"
TRAINING = "training"
EVALUATION = "evaluation"
TUNING = "tuning"
CHECKS = "checks"


def derive_seed(master_seed: int, component: str, index: int = 0) -> int:
    """
    Зерно компонента: ``SeedSequence`` от главного зерна, CRC32 имени компонента и номера.

    CRC32 не зависит от процесса, в отличие от встроенного ``hash`` строк.

    :param master_seed: Главное зерно
    :param component: Название компонента
    :param index: Номер экземпляра компонента (модель ансамбля, прогон проверки)
    :return:
    """

    if master_seed < 0 or index < 0:
        raise ValueError("seeds and indices must be non-negative")

    sequence = np.random.SeedSequence([master_seed, zlib.crc32(component.encode("utf-8")), index])

    return int(sequence.generate_state(1)[0])


def derive_seeds(master_seed: int, component: str, count: int) -> list[int]:
    """
    Зёрна ``count`` экземпляров компонента.

    :param master_seed: Главное зерно
    :param component: Название компонента
    :param count: Число экземпляров
    :return:
    """

    return [derive_seed(master_seed, component, index) for index in range(count)]
