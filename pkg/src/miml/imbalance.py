"""Bag-level negative oversampling.

When a bag is positive as soon as one of its instances is, a balanced
instance-level label rate still yields mostly positive bags.  To rebalance a
label's binary problem, instances of the bags that are negative for that
label are pooled and recombined into new negative bags.  Sampling with
replacement treats instances as independent draws, which is only sound if
an instance's label does not depend on the other instances in its bag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from miml.bagdata import Bag, MimlDataset
from miml.errors import ConfigError, DataError

SYNTHETIC_PREFIX = "synthetic-neg-"

INDEPENDENCE_NOTE = ("synthetic negative bags assume instances are independent draws; "
                     "sampled with replacement from the label's negative-bag instances")


def imbalance_probability(p_ins: float, n_i: int) -> float:
    """Probability that a bag of ``n_i`` independent instances is positive."""
    if not 0.0 <= p_ins <= 1.0:
        raise ValueError(f"p_ins must lie in [0, 1], got {p_ins}")
    if n_i < 1:
        raise ValueError(f"n_i must be >= 1, got {n_i}")
    return 1.0 - (1.0 - p_ins) ** n_i


@dataclass(frozen=True)
class OversampleConfig:
    """``max_bag_size=None`` means the largest training bag (at least 2)."""

    n_extra_bags: int = 0
    max_bag_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_extra_bags < 0:
            raise ConfigError("oversample.n_bags must be >= 0")
        if self.max_bag_size is not None and self.max_bag_size < 2:
            raise ConfigError("oversample.max_bag_size must be >= 2")


def is_synthetic(bag_id: str) -> bool:
    return bag_id.startswith(SYNTHETIC_PREFIX)


def extract_negative_pool(dataset: MimlDataset, label_index: int) -> np.ndarray:
    """All instances of the bags that are negative for ``label_index``, stacked."""
    if not 0 <= label_index < dataset.n_labels:
        raise DataError(f"label index {label_index} out of range")
    neg = np.flatnonzero(dataset.labels[:, label_index] == 0)
    if neg.size == 0:
        raise DataError(f"no negatives for label {label_index}; cannot oversample")
    return np.vstack([dataset.bags[i].instances for i in neg])


def oversample_negatives(pool, config: OversampleConfig, label_index: int = 0,
                         max_bag_size: int | None = None) -> list[Bag]:
    pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
    if pool.shape[0] == 0 or pool.size == 0:
        raise DataError("empty negative pool")
    hi = config.max_bag_size or max_bag_size or 2
    hi = max(int(hi), 2)
    rng = np.random.default_rng([config.seed, label_index])
    bags = []
    for i in range(config.n_extra_bags):
        size = int(rng.integers(2, hi + 1))
        picks = rng.integers(0, pool.shape[0], size=size)
        bags.append(Bag(f"{SYNTHETIC_PREFIX}{label_index}-{i:05d}", pool[picks]))
    return bags


def synthetic_negatives(train: MimlDataset, label_index: int,
                        config: OversampleConfig) -> list[Bag]:
    """Synthetic bags for one label, or ``[]`` if the label has no negative bags."""
    if config.n_extra_bags == 0:
        return []
    try:
        pool = extract_negative_pool(train, label_index)
    except DataError:
        return []
    largest = max(b.n_instances for b in train.bags)
    return oversample_negatives(pool, config, label_index, max_bag_size=largest)


def augment_training_fold(train: MimlDataset, label_index: int,
                          config: OversampleConfig) -> MimlDataset:
    """``train`` plus synthetic bags negative for ``label_index``.

    Only the ``label_index`` column is meaningful for the added bags; their
    other label entries are set to 0.
    """
    if any(is_synthetic(b) for b in train.bag_ids):
        raise DataError("training fold already contains synthetic bags")
    if config.n_extra_bags == 0:
        return train
    pool = extract_negative_pool(train, label_index)
    largest = max(b.n_instances for b in train.bags)
    bags = oversample_negatives(pool, config, label_index, max_bag_size=largest)
    return train.extend(bags, np.zeros((len(bags), train.n_labels), dtype=np.int8))
