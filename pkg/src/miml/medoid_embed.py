"""Constructive clustering: k-medoids over bags, then distance-to-medoid embedding.

Every bag, whatever its cardinality, becomes a length-``k`` vector of
Hausdorff distances to the ``k`` medoid bags chosen from the training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from miml.bagdata import Bag
from miml.errors import ConfigError
from miml.hausdorff import cross_distances, distance_matrix


@dataclass(frozen=True)
class MedoidSet:
    medoids: tuple
    indices: tuple = ()
    variant: str = "max"
    objective_history: tuple = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return len(self.medoids)

    @property
    def objective(self) -> float:
        return self.objective_history[-1] if self.objective_history else float("nan")


@dataclass(frozen=True)
class EmbeddedDataset:
    """Embedded bags ``z`` with aligned labels.

    ``extra_negatives`` optionally maps a label index to embedded rows of
    synthetic bags that are negative for that label only; they are used when
    training that label's classifier and nowhere else.
    """

    z: np.ndarray
    labels: np.ndarray
    bag_ids: tuple = ()
    extra_negatives: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.z.ndim != 2 or self.z.shape[0] != self.labels.shape[0]:
            raise ValueError(f"z {self.z.shape} and labels {self.labels.shape} misaligned")

    @property
    def n_bag(self) -> int:
        return self.z.shape[0]

    @property
    def k(self) -> int:
        return self.z.shape[1]

    @property
    def n_labels(self) -> int:
        return self.labels.shape[1]

    def subset(self, idx) -> EmbeddedDataset:
        idx = np.asarray(idx, dtype=np.int64)
        ids = tuple(self.bag_ids[i] for i in idx) if self.bag_ids else ()
        return EmbeddedDataset(self.z[idx], self.labels[idx], ids)


def _assign(dist: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, i.e. the lowest medoid slot on ties
    return np.argmin(dist[:, medoids], axis=1)


def _objective(dist: np.ndarray, medoids: np.ndarray) -> float:
    return float(dist[:, medoids].min(axis=1).sum())


def _seed_medoids(dist: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Randomized farthest-first seeding: each next medoid is drawn with
    probability proportional to its squared distance from the chosen set."""
    n = dist.shape[0]
    chosen = [int(rng.integers(n))]
    nearest = dist[chosen[0]].copy()
    for _ in range(1, k):
        w = nearest ** 2
        w[chosen] = 0.0
        total = w.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=w / total))
        else:
            nxt = int(np.setdiff1d(np.arange(n), chosen)[0])
        chosen.append(nxt)
        nearest = np.minimum(nearest, dist[nxt])
    return np.array(chosen, dtype=np.int64)


def _voronoi_run(dist: np.ndarray, medoids: np.ndarray, max_iter: int):
    n, k = dist.shape[0], medoids.size
    history = [_objective(dist, medoids)]
    assign = _assign(dist, medoids)
    for _ in range(max_iter):
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(assign == c)
            if members.size == 0:
                # empty cluster: move the medoid to the worst-served bag
                gap = dist[np.arange(n), new[assign]].copy()
                gap[new] = -np.inf
                if np.isfinite(gap.max()):
                    new[c] = int(np.argmax(gap))
                continue
            cost = dist[np.ix_(members, members)].sum(axis=1)
            new[c] = members[int(np.argmin(cost))]
        new_assign = _assign(dist, new)
        medoids = new
        history.append(_objective(dist, medoids))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return medoids, history


def kmedoids_indices(dist: np.ndarray, k: int, seed: int = 0, max_iter: int = 100,
                     n_init: int = 10) -> tuple[np.ndarray, list[float]]:
    """Alternating (Voronoi) k-medoids on a precomputed distance matrix.

    Assign every bag to its nearest medoid, then move each medoid to the
    cluster member with the smallest summed intra-cluster distance, until the
    assignment stops changing or ``max_iter`` sweeps have run.  The whole
    procedure is repeated from ``n_init`` seeded starts and the lowest
    objective wins (earliest start on ties).

    Returns the medoid indices and the winning run's objective (sum of
    distances to the nearest medoid) after seeding and after every sweep.
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    if n_init < 1:
        raise ConfigError(f"n_init must be >= 1, got {n_init}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        medoids, history = _voronoi_run(dist, _seed_medoids(dist, k, rng), max_iter)
        if best is None or history[-1] < best[1][-1]:
            best = (medoids, history)
        if best[1][-1] == 0.0:
            break
    return best


def kmedoids(bags: Sequence[Bag], k: int, seed: int = 0, max_iter: int = 100,
             variant: str = "max", dist: np.ndarray | None = None,
             n_init: int = 10) -> MedoidSet:
    """Select ``k`` medoid bags under the Hausdorff distance."""
    if not 1 <= k <= len(bags):
        raise ConfigError(f"k must be in [1, {len(bags)}], got {k}")
    if dist is None:
        dist = distance_matrix(bags, variant).values
    idx, history = kmedoids_indices(dist, k, seed, max_iter, n_init)
    return MedoidSet(tuple(bags[i] for i in idx), tuple(int(i) for i in idx), variant,
                     tuple(history))


def embed(bags: Sequence[Bag], medoids: MedoidSet) -> np.ndarray:
    """``(len(bags), k)`` matrix of distances from each bag to each medoid."""
    return cross_distances(bags, medoids.medoids, medoids.variant)
