"""Multi-instance multi-label learning with GA-optimized partial classifier chains.

Bags of instances are embedded into fixed-length vectors of Hausdorff
distances to k-medoids, then classified by calibrated kernel SVMs arranged
in a partial classifier chain whose order is searched by a genetic algorithm.
"""

from miml.bagdata import Bag, FoldSplit, MimlDataset, load_dataset, split_folds
from miml.chain_ga import BinarizationCriterion, Chain, ChainModel, GaConfig
from miml.errors import ConfigError, ConvergenceError, DataError, LeakageError, MimlError

__all__ = [
    "Bag",
    "BinarizationCriterion",
    "Chain",
    "ChainModel",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "FoldSplit",
    "GaConfig",
    "LeakageError",
    "MimlDataset",
    "MimlError",
    "load_dataset",
    "split_folds",
]

__version__ = "0.1.0"
