"""Hausdorff distances between bags of instances.

The default is the classic symmetric (max) Hausdorff distance with a
Euclidean base metric.  The ``average`` variant replaces each directed max by
the mean of the per-instance nearest-neighbour distances and symmetrizes by
averaging the two directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from miml.bagdata import Bag
from miml.errors import ConfigError, DataError

VARIANTS = ("max", "average")


def _points(bag) -> np.ndarray:
    return bag.instances if isinstance(bag, Bag) else np.atleast_2d(np.asarray(bag, dtype=np.float64))


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[1]:
        raise DataError(f"feature length mismatch: {a.shape[1]} vs {b.shape[1]}")
    # explicit differences keep d(a, b) == d(b, a) bit for bit
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ConfigError(f"distance.variant must be one of {VARIANTS}, got {variant!r}")


def directed_hausdorff(a, b, variant: str = "max") -> float:
    """h(A, B): how far the worst-matched point of ``a`` is from ``b``."""
    _check_variant(variant)
    nearest = _pairwise(_points(a), _points(b)).min(axis=1)
    return float(nearest.max() if variant == "max" else nearest.mean())


def hausdorff(a, b, variant: str = "max") -> float:
    _check_variant(variant)
    d = _pairwise(_points(a), _points(b))
    if variant == "max":
        return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
    return float(0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()))


def cross_distances(rows: Sequence, cols: Sequence, variant: str = "max") -> np.ndarray:
    """Matrix of ``hausdorff(rows[i], cols[j])`` for every pair.

    Computed one row bag at a time against all column instances at once, then
    reduced per column bag; equal to the pairwise calls entry by entry.
    """
    _check_variant(variant)
    row_pts = [_points(r) for r in rows]
    col_pts = [_points(c) for c in cols]
    out = np.zeros((len(row_pts), len(col_pts)))
    if not row_pts or not col_pts:
        return out
    widths = {p.shape[1] for p in row_pts + col_pts}
    if len(widths) != 1:
        raise DataError(f"bags have mixed feature lengths {sorted(widths)}")
    sizes = np.array([p.shape[0] for p in col_pts])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    all_cols = np.vstack(col_pts)
    for i, a in enumerate(row_pts):
        d = _pairwise(a, all_cols)
        col_nearest = d.min(axis=0)
        if variant == "max":
            fwd = np.minimum.reduceat(d, starts, axis=1).max(axis=0)
            back = np.maximum.reduceat(col_nearest, starts)
            out[i] = np.maximum(fwd, back)
        else:
            fwd = np.minimum.reduceat(d, starts, axis=1).mean(axis=0)
            back = np.add.reduceat(col_nearest, starts) / sizes
            out[i] = 0.5 * (fwd + back)
    return out


@dataclass(frozen=True)
class BagDistanceMatrix:
    values: np.ndarray
    bag_ids: tuple

    def __post_init__(self):
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.bag_ids)


def distance_matrix(bags: Sequence[Bag], variant: str = "max") -> BagDistanceMatrix:
    """Symmetric all-pairs bag distance matrix with an exactly zero diagonal."""
    values = cross_distances(bags, bags, variant)
    upper = np.triu(values, k=1)
    values = upper + upper.T
    ids = tuple(b.bag_id if isinstance(b, Bag) else str(i) for i, b in enumerate(bags))
    return BagDistanceMatrix(values, ids)
