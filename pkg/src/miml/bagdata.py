"""Bag/label data model, file ingestion, fold splitting and synthetic data.

A dataset is a list of bags (variable-size sets of instance vectors) with one
binary relevance vector per bag.  Two on-disk formats are supported:

``bag-jsonl``
    one JSON object per line, ``{"bag_id": ..., "instances": [[...], ...],
    "labels": [0, 1, ...]}``.
``instance-csv``
    one instance per row, header ``bag_id,f_0,...,f_{F-1},y_0,...,y_{L-1}``;
    rows sharing a ``bag_id`` form one bag and must agree on the labels.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from miml.errors import DataError

FORMATS = ("bag-jsonl", "instance-csv")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Bag:
    """One example: an identifier plus an ``(n_i, n_feat)`` instance matrix."""

    bag_id: str
    instances: np.ndarray

    def __post_init__(self):
        inst = np.array(self.instances, dtype=np.float64)
        if inst.ndim == 1:
            inst = inst.reshape(1, -1)
        if inst.ndim != 2 or inst.shape[0] < 1:
            raise DataError(f"bag {self.bag_id!r}: needs at least one instance")
        if inst.shape[1] < 1:
            raise DataError(f"bag {self.bag_id!r}: instances have no features")
        if not np.all(np.isfinite(inst)):
            raise DataError(f"bag {self.bag_id!r}: non-finite feature value")
        object.__setattr__(self, "instances", _frozen(inst))

    @property
    def n_instances(self) -> int:
        return self.instances.shape[0]

    @property
    def n_feat(self) -> int:
        return self.instances.shape[1]

    def __len__(self) -> int:
        return self.instances.shape[0]


@dataclass(frozen=True)
class MimlDataset:
    """Aligned bags and binary label vectors.

    ``provenance`` is an optional debug field filled by the synthetic
    generator: one boolean ``(n_i, n_labels)`` matrix per bag recording which
    label clusters contributed to each instance.  It is never serialized.
    """

    bags: tuple
    labels: np.ndarray
    label_names: tuple = ()
    provenance: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        bags = tuple(self.bags)
        if not bags:
            raise DataError("dataset has no bags")
        labels = np.array(self.labels, dtype=np.int8)
        if labels.ndim == 1:
            labels = labels.reshape(-1, 1)
        if labels.shape[0] != len(bags):
            raise DataError(f"{len(bags)} bags but {labels.shape[0]} label vectors")
        if labels.shape[1] < 1:
            raise DataError("dataset has no labels")
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError("label values must be 0 or 1")
        n_feat = bags[0].n_feat
        seen = set()
        for bag in bags:
            if bag.n_feat != n_feat:
                raise DataError(
                    f"bag {bag.bag_id!r} has {bag.n_feat} features, expected {n_feat}")
            if bag.bag_id in seen:
                raise DataError(f"duplicate bag_id {bag.bag_id!r}")
            seen.add(bag.bag_id)
        names = tuple(self.label_names) or tuple(f"y_{j}" for j in range(labels.shape[1]))
        if len(names) != labels.shape[1]:
            raise DataError(f"{len(names)} label names for {labels.shape[1]} labels")
        object.__setattr__(self, "bags", bags)
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "label_names", names)

    @property
    def n_bag(self) -> int:
        return len(self.bags)

    @property
    def n_feat(self) -> int:
        return self.bags[0].n_feat

    @property
    def n_labels(self) -> int:
        return self.labels.shape[1]

    @property
    def bag_ids(self) -> list[str]:
        return [b.bag_id for b in self.bags]

    def __len__(self) -> int:
        return len(self.bags)

    def subset(self, indices: Iterable[int]) -> MimlDataset:
        idx = [int(i) for i in indices]
        prov = None if self.provenance is None else tuple(self.provenance[i] for i in idx)
        return MimlDataset(tuple(self.bags[i] for i in idx), self.labels[idx],
                           self.label_names, prov)

    def extend(self, bags: Sequence[Bag], labels: np.ndarray) -> MimlDataset:
        """Return a new dataset with ``bags`` appended (provenance is dropped)."""
        if not bags:
            return self
        labels = np.asarray(labels, dtype=np.int8).reshape(len(bags), self.n_labels)
        return MimlDataset(self.bags + tuple(bags), np.vstack([self.labels, labels]),
                           self.label_names)

    def with_bags(self, bags: Sequence[Bag]) -> MimlDataset:
        """Same labels and names, different (e.g. rescaled) instance data."""
        return MimlDataset(tuple(bags), self.labels, self.label_names, self.provenance)


@dataclass(frozen=True)
class FoldSplit:
    fold_assignments: np.ndarray
    n_folds: int
    seed: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices of the training and test bags for ``fold``."""
        test = np.flatnonzero(self.fold_assignments == fold)
        train = np.flatnonzero(self.fold_assignments != fold)
        return train, test


# ---------------------------------------------------------------------------
# I/O


def _parse_label_row(values, line_no: int) -> list[int]:
    out = []
    for v in values:
        if isinstance(v, bool) or v not in (0, 1):
            raise DataError(f"line {line_no}: label values must be 0 or 1, got {v!r}")
        out.append(int(v))
    return out


def _load_jsonl(path: Path) -> MimlDataset:
    bags, labels = [], []
    n_feat = n_labels = None
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or not {"bag_id", "instances", "labels"} <= rec.keys():
                raise DataError(f"line {line_no}: expected keys bag_id, instances, labels")
            bag_id = str(rec["bag_id"])
            inst = rec["instances"]
            if not isinstance(inst, list) or not inst or not all(isinstance(r, list) for r in inst):
                raise DataError(f"line {line_no}: instances must be a non-empty list of lists")
            widths = {len(r) for r in inst}
            if len(widths) != 1:
                raise DataError(f"line {line_no}: instances of unequal length")
            width = widths.pop()
            if n_feat is None:
                n_feat = width
            elif width != n_feat:
                raise DataError(
                    f"line {line_no}: feature length {width}, expected {n_feat}")
            lab = rec["labels"]
            if not isinstance(lab, list):
                raise DataError(f"line {line_no}: labels must be a list")
            if n_labels is None:
                n_labels = len(lab)
            elif len(lab) != n_labels:
                raise DataError(
                    f"line {line_no}: label vector length {len(lab)}, expected {n_labels}")
            if bag_id in ids:
                raise DataError(f"line {line_no}: duplicate bag_id {bag_id!r}")
            ids.add(bag_id)
            try:
                arr = np.array(inst, dtype=np.float64)
            except (TypeError, ValueError):
                raise DataError(f"line {line_no}: non-numeric feature value") from None
            try:
                bags.append(Bag(bag_id, arr))
            except DataError as exc:
                raise DataError(f"line {line_no}: {exc}") from None
            labels.append(_parse_label_row(lab, line_no))
    if not bags:
        raise DataError(f"{path}: no records")
    return MimlDataset(tuple(bags), np.array(labels, dtype=np.int8))


def _load_csv(path: Path) -> MimlDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0] != "bag_id":
            raise DataError("line 1: first column must be bag_id")
        f_cols = [c for c in header[1:] if c.startswith("f_")]
        y_cols = [c for c in header[1:] if c.startswith("y_")]
        n_feat, n_labels = len(f_cols), len(y_cols)
        expected = ["bag_id"] + [f"f_{j}" for j in range(n_feat)] + [f"y_{j}" for j in range(n_labels)]
        if header != expected or n_feat == 0 or n_labels == 0:
            raise DataError("line 1: header must be bag_id,f_0..f_{F-1},y_0..y_{L-1}")
        rows: dict[str, list] = {}
        bag_labels: dict[str, list[int]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"line {line_no}: {len(row)} fields, expected {len(header)}")
            bag_id = row[0]
            try:
                feats = [float(v) for v in row[1:1 + n_feat]]
                labs = [int(v) for v in row[1 + n_feat:]]
            except ValueError:
                raise DataError(f"line {line_no}: non-numeric value") from None
            if not all(math.isfinite(v) for v in feats):
                raise DataError(f"line {line_no}: non-finite feature value")
            labs = _parse_label_row(labs, line_no)
            if bag_id in bag_labels:
                if bag_labels[bag_id] != labs:
                    raise DataError(
                        f"line {line_no}: labels for bag {bag_id!r} differ from earlier rows")
            else:
                bag_labels[bag_id] = labs
                rows[bag_id] = []
            rows[bag_id].append(feats)
    if not rows:
        raise DataError(f"{path}: no records")
    bags = tuple(Bag(bid, np.array(inst)) for bid, inst in rows.items())
    return MimlDataset(bags, np.array([bag_labels[b] for b in rows], dtype=np.int8))


def load_dataset(path, format: str = "bag-jsonl") -> MimlDataset:
    """Read and validate a dataset file in one of :data:`FORMATS`."""
    path = Path(path)
    if format not in FORMATS:
        raise DataError(f"unknown dataset format {format!r}; choose from {FORMATS}")
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    if format == "bag-jsonl":
        return _load_jsonl(path)
    return _load_csv(path)


def write_dataset(ds: MimlDataset, path, format: str = "bag-jsonl") -> None:
    """Write ``ds``; floats are emitted with ``repr`` so reading back is exact."""
    path = Path(path)
    if format == "bag-jsonl":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for bag, lab in zip(ds.bags, ds.labels):
                rec = {"bag_id": bag.bag_id, "instances": bag.instances.tolist(),
                       "labels": [int(v) for v in lab]}
                fh.write(json.dumps(rec) + "\n")
    elif format == "instance-csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bag_id"] + [f"f_{j}" for j in range(ds.n_feat)]
                            + [f"y_{j}" for j in range(ds.n_labels)])
            for bag, lab in zip(ds.bags, ds.labels):
                labs = [str(int(v)) for v in lab]
                for inst in bag.instances:
                    writer.writerow([bag.bag_id] + [repr(float(v)) for v in inst] + labs)
    else:
        raise DataError(f"unknown dataset format {format!r}; choose from {FORMATS}")


# ---------------------------------------------------------------------------
# splitting and scaling


def split_folds(ds: MimlDataset, n_folds: int, seed: int) -> FoldSplit:
    """Assign bags to ``n_folds`` folds whose sizes differ by at most one."""
    if not 2 <= n_folds <= ds.n_bag:
        raise DataError(f"n_folds must be in [2, {ds.n_bag}], got {n_folds}")
    order = np.random.default_rng(seed).permutation(ds.n_bag)
    folds = np.empty(ds.n_bag, dtype=np.int64)
    folds[order] = np.arange(ds.n_bag) % n_folds
    return FoldSplit(_frozen(folds), n_folds, seed)


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature affine map fit on training instances; constant features map to 0."""

    mins: np.ndarray
    ranges: np.ndarray

    @classmethod
    def fit(cls, ds: MimlDataset) -> MinMaxScaler:
        x = np.vstack([b.instances for b in ds.bags])
        lo = x.min(axis=0)
        return cls(_frozen(lo), _frozen(x.max(axis=0) - lo))

    def transform_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        live = self.ranges > 0
        out[..., live] = (x[..., live] - self.mins[live]) / self.ranges[live]
        return out

    def transform(self, ds: MimlDataset) -> MimlDataset:
        return ds.with_bags([Bag(b.bag_id, self.transform_array(b.instances)) for b in ds.bags])

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "ranges": self.ranges.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> MinMaxScaler:
        return cls(_frozen(np.array(d["mins"], dtype=np.float64)),
                   _frozen(np.array(d["ranges"], dtype=np.float64)))


def normalize_features(train: MimlDataset, others: Sequence[MimlDataset] = ()):
    """Min-max scale ``train`` and apply the same map to each of ``others``.

    Returns ``(train_scaled, others_scaled, scaler)``.
    """
    scaler = MinMaxScaler.fit(train)
    return scaler.transform(train), [scaler.transform(o) for o in others], scaler


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic MIML generator.

    Each label owns a Gaussian cluster centre; an instance's feature vector is
    isotropic noise plus the centres of every label cluster it was drawn from.
    A bag is relevant to a label iff at least one of its instances carries that
    label's cluster.

    Two sampling modes exist.  With ``p_instance`` set, every instance carries
    every label independently with that probability, so the bag-level positive
    rate is ``1 - (1 - p_instance) ** n_i``.  Otherwise labels are first drawn
    per bag (rate ``label_rate``, or the ``dep_high``/``dep_low`` conditionals
    on the previous label when ``chain_dependency`` is set) and then planted in
    a random non-empty subset of the bag's instances.  With
    ``allow_empty=False`` the per-bag label draw is repeated until at least
    one label is present (bag-level mode only).
    """

    n_bag: int
    n_i_range: tuple = (2, 5)
    n_feat: int = 5
    n_labels: int = 3
    chain_dependency: bool = False
    seed: int = 0
    p_instance: float | None = None
    label_rate: float = 0.4
    dep_high: float = 0.9
    dep_low: float = 0.1
    carrier_rate: float = 0.5
    separation: float = 3.0
    noise: float = 1.0
    allow_empty: bool = True


def _draw_labels(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    present = np.zeros(spec.n_labels, dtype=bool)
    for lab in range(spec.n_labels):
        rate = spec.label_rate
        if spec.chain_dependency and lab > 0:
            rate = spec.dep_high if present[lab - 1] else spec.dep_low
        present[lab] = rng.random() < rate
    return present


def generate_synthetic(spec: SynthSpec) -> MimlDataset:
    lo, hi = (int(v) for v in spec.n_i_range)
    if spec.n_bag < 1 or spec.n_feat < 1 or spec.n_labels < 1:
        raise DataError("n_bag, n_feat and n_labels must all be positive")
    if lo < 1 or hi < lo:
        raise DataError(f"invalid n_i_range {spec.n_i_range}")
    if spec.p_instance is not None:
        if not 0.0 <= spec.p_instance <= 1.0:
            raise DataError("p_instance must lie in [0, 1]")
        if spec.chain_dependency:
            raise DataError("chain_dependency needs bag-level sampling (p_instance unset)")
        if not spec.allow_empty:
            raise DataError("allow_empty=False needs bag-level sampling (p_instance unset)")
    for name in ("label_rate", "dep_high", "dep_low", "carrier_rate"):
        if not 0.0 <= getattr(spec, name) <= 1.0:
            raise DataError(f"{name} must lie in [0, 1]")

    rng = np.random.default_rng(spec.seed)
    centres = rng.normal(0.0, 1.0, size=(spec.n_labels, spec.n_feat))
    centres *= spec.separation / np.linalg.norm(centres, axis=1, keepdims=True)

    bags, labels, prov = [], [], []
    for i in range(spec.n_bag):
        n_i = int(rng.integers(lo, hi + 1))
        if spec.p_instance is not None:
            carry = rng.random((n_i, spec.n_labels)) < spec.p_instance
        else:
            present = _draw_labels(spec, rng)
            while not spec.allow_empty and not present.any():
                present = _draw_labels(spec, rng)
            carry = (rng.random((n_i, spec.n_labels)) < spec.carrier_rate) & present
            for lab in np.flatnonzero(present & ~carry.any(axis=0)):
                carry[rng.integers(n_i), lab] = True
        feats = rng.normal(0.0, spec.noise, size=(n_i, spec.n_feat)) + carry @ centres
        y = carry.any(axis=0)
        bags.append(Bag(f"bag-{i:05d}", feats))
        labels.append(y.astype(np.int8))
        prov.append(_frozen(carry))
    return MimlDataset(tuple(bags), np.array(labels), provenance=tuple(prov))
