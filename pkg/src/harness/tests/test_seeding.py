import pytest

from harness.services.seeding import DATASET, DYNAMICS, derive_seed, derive_seeds


def test_seed_is_stable():
    assert derive_seed(7, DATASET) == derive_seed(7, DATASET)
    assert derive_seeds(7, DYNAMICS, 3) == [derive_seed(7, DYNAMICS, index) for index in range(3)]


def test_seeds_differ_by_component_index_and_master():
    seeds = {
        derive_seed(0, DATASET),
        derive_seed(0, DYNAMICS),
        derive_seed(0, DYNAMICS, 1),
        derive_seed(1, DATASET),
    }
    assert len(seeds) == 4
    assert len(set(derive_seeds(0, DYNAMICS, 10))) == 10


def test_seed_range():
    assert 0 <= derive_seed(2**40, DATASET) < 2**32
    with pytest.raises(ValueError):
        derive_seed(-1, DATASET)
