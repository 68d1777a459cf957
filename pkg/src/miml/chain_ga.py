"""Partial classifier chains over embedded bags, and GA search over chain orders.

A chain is an ordered subset of label indices.  The classifier at chain
position ``j`` sees the embedded bag plus the calibrated probabilities
predicted by the ``j`` classifiers before it; labels outside the chain get a
classifier on the embedding alone.  Training uses *predicted* predecessor
probabilities, never ground truth, so train and test features match.

Because the classifier at a chain position depends only on the chain prefix
ending there, :class:`ChainTrainer` caches models by prefix.  Different GA
individuals that share prefixes then share trained SVMs, and the classifier
of an off-chain label is the same object as the head of any chain starting
with that label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from miml.errors import ConfigError, DataError
from miml.kernel_svm import KernelSpec, SvmModel, proba, train_calibrated
from miml.medoid_embed import EmbeddedDataset
from miml.mlmetrics import accuracy_jaccard


@dataclass(frozen=True)
class Chain:
    order: tuple
    n_labels: int

    def __post_init__(self):
        order = tuple(int(v) for v in self.order)
        if len(set(order)) != len(order):
            raise ConfigError(f"chain {order} repeats a label")
        if any(not 0 <= v < self.n_labels for v in order):
            raise ConfigError(f"chain {order} has labels outside [0, {self.n_labels})")
        object.__setattr__(self, "order", order)

    @classmethod
    def empty(cls, n_labels: int) -> Chain:
        return cls((), n_labels)

    @classmethod
    def full(cls, n_labels: int) -> Chain:
        return cls(tuple(range(n_labels)), n_labels)

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def off_chain(self) -> list[int]:
        on = set(self.order)
        return [l for l in range(self.n_labels) if l not in on]


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tol: float = 1e-3

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError(f"svm.C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise ConfigError(f"svm.tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class BinarizationCriterion:
    """``T``: labels scoring above 0.5.  ``C``: above ``0.5 - c_threshold``.

    Either way, an example with no label above the threshold gets its single
    top-scoring label.
    """

    kind: str = "T"
    c_threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("T", "C"):
            raise ConfigError(f"criterion.kind must be T or C, got {self.kind!r}")
        if not 0.0 <= self.c_threshold <= 0.5:
            raise ConfigError(f"criterion.c_threshold must lie in [0, 0.5], got {self.c_threshold}")

    @property
    def threshold(self) -> float:
        return 0.5 - (self.c_threshold if self.kind == "C" else 0.0)


def binarize(scores, criterion: BinarizationCriterion) -> np.ndarray:
    """Binary label matrix (or vector, for a 1-D input) from probability scores."""
    s = np.asarray(scores, dtype=np.float64)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    out = (s > criterion.threshold).astype(np.int8)
    none = ~out.any(axis=1)
    out[none, np.argmax(s[none], axis=1)] = 1
    return out[0] if single else out


@dataclass(frozen=True)
class ChainModel:
    chain: Chain
    chained_svms: tuple
    independent_svms: dict
    k: int

    @property
    def n_labels(self) -> int:
        return self.chain.n_labels

    def to_dict(self) -> dict:
        return {
            "chain": list(self.chain.order),
            "n_labels": self.n_labels,
            "k": self.k,
            "chained_svms": [m.to_dict() for m in self.chained_svms],
            "independent_svms": {str(l): m.to_dict() for l, m in sorted(self.independent_svms.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> ChainModel:
        return cls(Chain(tuple(d["chain"]), d["n_labels"]),
                   tuple(SvmModel.from_dict(m) for m in d["chained_svms"]),
                   {int(l): SvmModel.from_dict(m) for l, m in d["independent_svms"].items()},
                   int(d["k"]))


class ChainTrainer:
    """Trains and caches chain-position classifiers for one embedded training set."""

    def __init__(self, data: EmbeddedDataset, svm: SvmConfig | None = None):
        if data.n_bag == 0:
            raise DataError("empty training set")
        self.data = data
        self.svm = svm or SvmConfig()
        self._models: dict[tuple, SvmModel] = {}
        self._train_cols: dict[tuple, np.ndarray] = {}

    def forward(self, prefix: tuple, rows: np.ndarray) -> np.ndarray:
        """Probabilities of the prefix labels on ``rows``, fed forward in order."""
        cols = np.empty((rows.shape[0], len(prefix)))
        for j in range(len(prefix)):
            model = self.model_for(prefix[:j + 1])
            cols[:, j] = proba(model, np.hstack([rows, cols[:, :j]]))
        return cols

    def _train_forward(self, prefix: tuple) -> np.ndarray:
        cols = [self._train_column(prefix[:j + 1]) for j in range(len(prefix))]
        return np.column_stack(cols) if cols else np.empty((self.data.n_bag, 0))

    def _train_column(self, prefix: tuple) -> np.ndarray:
        if prefix not in self._train_cols:
            model = self.model_for(prefix)
            x = np.hstack([self.data.z, self._train_forward(prefix[:-1])])
            self._train_cols[prefix] = proba(model, x)
        return self._train_cols[prefix]

    def model_for(self, prefix: tuple) -> SvmModel:
        """Classifier for label ``prefix[-1]`` with ``prefix[:-1]`` as predecessors."""
        prefix = tuple(prefix)
        if prefix in self._models:
            return self._models[prefix]
        label = prefix[-1]
        x = np.hstack([self.data.z, self._train_forward(prefix[:-1])])
        y = self.data.labels[:, label].astype(np.int8)
        extra = self.data.extra_negatives.get(label)
        if extra is not None and len(extra):
            extra = np.asarray(extra, dtype=np.float64)
            x = np.vstack([x, np.hstack([extra, self.forward(prefix[:-1], extra)])])
            y = np.concatenate([y, np.zeros(extra.shape[0], dtype=np.int8)])
        s = self.svm
        model = train_calibrated(x, y, s.C, s.kernel, s.tol)
        self._models[prefix] = model
        return model

    def train(self, chain: Chain) -> ChainModel:
        order = chain.order
        chained = tuple(self.model_for(order[:j + 1]) for j in range(len(order)))
        indep = {l: self.model_for((l,)) for l in chain.off_chain()}
        return ChainModel(chain, chained, indep, self.data.k)

    @property
    def n_trained(self) -> int:
        return len(self._models)


def train_chain(Z: EmbeddedDataset, chain: Chain, svm_config: SvmConfig | None = None,
                trainer: ChainTrainer | None = None) -> ChainModel:
    if chain.n_labels != Z.n_labels:
        raise ConfigError(f"chain is over {chain.n_labels} labels, data has {Z.n_labels}")
    trainer = trainer or ChainTrainer(Z, svm_config)
    return trainer.train(chain)


def predict_scores(model: ChainModel, z_rows) -> np.ndarray:
    """``(n, n_labels)`` matrix of clipped relevance probabilities."""
    z = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
    if z.shape[1] != model.k:
        raise DataError(f"expected {model.k} embedded features, got {z.shape[1]}")
    out = np.empty((z.shape[0], model.n_labels))
    for label, m in model.independent_svms.items():
        out[:, label] = proba(m, z)
    feats = z
    for label, m in zip(model.chain.order, model.chained_svms):
        col = proba(m, feats)
        out[:, label] = col
        feats = np.hstack([feats, col[:, None]])
    return out


def fitness(chain: Chain, Z_train: EmbeddedDataset, Z_val: EmbeddedDataset,
            criterion: BinarizationCriterion, svm_config: SvmConfig | None = None,
            trainer: ChainTrainer | None = None) -> float:
    """Example-based (Jaccard) accuracy on ``Z_val`` of a chain trained on ``Z_train``."""
    if Z_val.n_bag == 0:
        raise DataError("empty validation set")
    model = train_chain(Z_train, chain, svm_config, trainer)
    pred = binarize(predict_scores(model, Z_val.z), criterion)
    return accuracy_jaccard(Z_val.labels, pred)


# ---------------------------------------------------------------------------
# genetic search


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 10
    tournament_size: int = 3
    max_mutation_length_change: int = 2
    generations: int = 20
    crossover_rate: float = 0.9
    mutation_rate: float = 0.3
    stagnation: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1:
            raise ConfigError("ga.population must be >= 1")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ConfigError("ga.tournament must be in [1, ga.population]")
        if self.generations < 1:
            raise ConfigError("ga.generations must be >= 1")
        if self.max_mutation_length_change < 0:
            raise ConfigError("ga.mutation_len must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"ga.{name} must lie in [0, 1]")
        if self.stagnation < 1:
            raise ConfigError("ga.stagnation must be >= 1")


def crossover(a: Chain, b: Chain, seed=None) -> Chain:
    """Cut ``a`` at a random point, append ``b``'s missing labels in ``b``'s
    order, then truncate to a random length between the parents' lengths."""
    if a.n_labels != b.n_labels:
        raise ConfigError("parents use different label alphabets")
    rng = np.random.default_rng(seed)
    cut = int(rng.integers(0, len(a) + 1))
    head = a.order[:cut]
    child = head + tuple(l for l in b.order if l not in head)
    lo, hi = sorted((len(a), len(b)))
    target = int(rng.integers(lo, hi + 1))
    return Chain(child[:target], a.n_labels)


def mutate(c: Chain, config: GaConfig | None = None, seed=None) -> Chain:
    """Insert absent labels, delete present ones, or swap two positions.

    Inserts and deletes change the length by at most
    ``config.max_mutation_length_change``.
    """
    config = config or GaConfig()
    rng = np.random.default_rng(seed)
    order = list(c.order)
    absent = c.off_chain()
    max_change = config.max_mutation_length_change
    ops = []
    if absent and max_change > 0:
        ops.append("insert")
    if order and max_change > 0:
        ops.append("delete")
    if len(order) >= 2:
        ops.append("swap")
    if not ops:
        return c
    op = ops[int(rng.integers(len(ops)))]
    if op == "insert":
        count = int(rng.integers(1, min(max_change, len(absent)) + 1))
        for label in rng.choice(absent, size=count, replace=False):
            order.insert(int(rng.integers(0, len(order) + 1)), int(label))
    elif op == "delete":
        count = int(rng.integers(1, min(max_change, len(order)) + 1))
        drop = set(int(i) for i in rng.choice(len(order), size=count, replace=False))
        order = [l for i, l in enumerate(order) if i not in drop]
    else:
        i, j = rng.choice(len(order), size=2, replace=False)
        order[i], order[j] = order[j], order[i]
    return Chain(tuple(order), c.n_labels)


def random_chain(n_labels: int, rng: np.random.Generator) -> Chain:
    length = int(rng.integers(0, n_labels + 1))
    return Chain(tuple(int(v) for v in rng.permutation(n_labels)[:length]), n_labels)


def initial_population(n_labels: int, config: GaConfig) -> list[Chain]:
    """Empty chain, full sequential chain, then random chains up to the population size."""
    rng = np.random.default_rng([config.seed, 0xC4A1])
    pop = [Chain.empty(n_labels), Chain.full(n_labels)][:config.population_size]
    while len(pop) < config.population_size:
        pop.append(random_chain(n_labels, rng))
    return pop


def tournament(fits: Sequence[float], size: int, rng: np.random.Generator) -> int:
    """Index of the fittest of ``size`` distinct random contestants (lowest index on ties)."""
    contestants = np.sort(rng.choice(len(fits), size=size, replace=False))
    return int(contestants[int(np.argmax([fits[i] for i in contestants]))])


@dataclass
class GaResult:
    best: Chain
    best_fitness: float
    history: list
    evaluations: dict

    @property
    def n_evaluations(self) -> int:
        return len(self.evaluations)


def ga_search(Z_train: EmbeddedDataset, Z_val: EmbeddedDataset, config: GaConfig,
              criterion: BinarizationCriterion, svm_config: SvmConfig | None = None,
              population: Sequence[Chain] | None = None) -> GaResult:
    """Evolve chain orders; return the all-time best chain and per-generation best fitness.

    ``generations`` counts evaluated populations, the initial one included.
    Each later population keeps the current best individual unchanged and
    fills the rest with children of tournament-selected parents.  The search
    stops early after ``stagnation`` generations without improvement.
    Fitness values are memoized per chain order.
    """
    n_labels = Z_train.n_labels
    trainer = ChainTrainer(Z_train, svm_config)
    evaluations: dict[tuple, float] = {}

    def evaluate(chain: Chain) -> float:
        if chain.order not in evaluations:
            evaluations[chain.order] = fitness(chain, Z_train, Z_val, criterion,
                                               trainer=trainer)
        return evaluations[chain.order]

    pop = list(population) if population is not None else initial_population(n_labels, config)
    if not pop:
        raise ConfigError("empty initial population")
    rng = np.random.default_rng(config.seed)
    fits = [evaluate(c) for c in pop]
    best_i = int(np.argmax(fits))
    best, best_fit = pop[best_i], fits[best_i]
    history = [best_fit]
    stale = 0
    for _ in range(1, config.generations):
        children = [best]
        while len(children) < len(pop):
            pa = pop[tournament(fits, min(config.tournament_size, len(pop)), rng)]
            pb = pop[tournament(fits, min(config.tournament_size, len(pop)), rng)]
            child = crossover(pa, pb, rng) if rng.random() < config.crossover_rate else pa
            if rng.random() < config.mutation_rate:
                child = mutate(child, config, rng)
            children.append(child)
        pop = children
        fits = [evaluate(c) for c in pop]
        gen_i = int(np.argmax(fits))
        if fits[gen_i] > best_fit:
            best, best_fit = pop[gen_i], fits[gen_i]
            stale = 0
        else:
            stale += 1
        history.append(best_fit)
        if stale >= config.stagnation:
            break
    return GaResult(best, best_fit, history, evaluations)
