import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miml.bagdata import Bag, MimlDataset
from miml.errors import ConfigError, DataError
from miml.imbalance import (OversampleConfig, augment_training_fold, extract_negative_pool,
                            imbalance_probability, is_synthetic, oversample_negatives,
                            synthetic_negatives)


def small_fold():
    bags = (Bag("p", [[1.0], [2.0]]), Bag("n1", [[10.0], [11.0], [12.0]]), Bag("n2", [[20.0]]))
    return MimlDataset(bags, np.array([[1, 1], [0, 1], [0, 1]]))


def test_formula_examples():
    assert imbalance_probability(0.5, 2) == 0.75
    assert imbalance_probability(0.0, 5) == 0.0
    assert imbalance_probability(1.0, 3) == 1.0
    assert imbalance_probability(0.3, 1) == pytest.approx(0.3)


@settings(max_examples=100)
@given(st.floats(0, 1), st.integers(1, 30))
def test_formula_monotone_in_bag_size(p, n):
    assert imbalance_probability(p, n + 1) >= imbalance_probability(p, n) - 1e-15


@pytest.mark.parametrize("p,n", [(1.5, 2), (0.5, 0)])
def test_formula_domain(p, n):
    with pytest.raises(ValueError):
        imbalance_probability(p, n)


def test_monte_carlo_agreement():
    rng = np.random.default_rng(0)
    for p, n in [(0.2, 3), (0.6, 2), (0.05, 10)]:
        hits = (rng.random((200_000, n)) < p).any(axis=1).mean()
        assert abs(hits - imbalance_probability(p, n)) < 5e-3


def test_pool_holds_only_negative_bag_instances():
    pool = extract_negative_pool(small_fold(), 0)
    assert sorted(pool.ravel().tolist()) == [10.0, 11.0, 12.0, 20.0]
    with pytest.raises(DataError):
        extract_negative_pool(small_fold(), 1)


def test_synthetic_bags_drawn_from_pool():
    pool = extract_negative_pool(small_fold(), 0)
    bags = oversample_negatives(pool, OversampleConfig(50, max_bag_size=4, seed=1), label_index=0)
    assert len(bags) == 50
    allowed = set(pool.ravel().tolist())
    for b in bags:
        assert is_synthetic(b.bag_id)
        assert 2 <= b.n_instances <= 4
        assert set(b.instances.ravel().tolist()) <= allowed
    sizes = {b.n_instances for b in bags}
    assert sizes == {2, 3, 4}


def test_default_size_cap_is_largest_bag():
    bags = synthetic_negatives(small_fold(), 0, OversampleConfig(100, seed=2))
    assert max(b.n_instances for b in bags) <= 3


def test_zero_and_impossible():
    assert synthetic_negatives(small_fold(), 0, OversampleConfig(0)) == []
    assert synthetic_negatives(small_fold(), 1, OversampleConfig(5)) == []


def test_deterministic_and_label_specific():
    pool = extract_negative_pool(small_fold(), 0)
    cfg = OversampleConfig(10, seed=3)
    a = oversample_negatives(pool, cfg, 0, 3)
    b = oversample_negatives(pool, cfg, 0, 3)
    c = oversample_negatives(pool, cfg, 1, 3)
    assert all(np.array_equal(x.instances, y.instances) for x, y in zip(a, b))
    assert any(not np.array_equal(x.instances, y.instances) for x, y in zip(a, c))


def test_augment_appends_negatives_only():
    fold = small_fold()
    out = augment_training_fold(fold, 0, OversampleConfig(7, seed=0))
    assert out.n_bag == 10
    assert out.labels[3:].sum() == 0
    assert out.bag_ids[:3] == fold.bag_ids
    with pytest.raises(DataError):
        augment_training_fold(out, 0, OversampleConfig(1))


@pytest.mark.parametrize("kw", [dict(n_extra_bags=-1), dict(max_bag_size=1)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        OversampleConfig(**kw)
