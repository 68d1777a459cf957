"""End-to-end training, cross-validation, sweeps and model persistence.

Per training set the pipeline is: min-max scaling, k-medoids over the scaled
bags, embedding, optional per-label negative oversampling (embedded with the
already-fitted medoids), chain-order search on an internal validation split,
and finally a chain model trained on the whole training set.  Everything is
fit on training bags only; test bags are touched once, for prediction.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from miml import config as cfgmod
from miml.bagdata import Bag, FoldSplit, MimlDataset, MinMaxScaler, load_dataset, split_folds
from miml.chain_ga import (BinarizationCriterion, Chain, ChainModel, GaConfig, SvmConfig,
                           binarize, ga_search, predict_scores, train_chain)
from miml.errors import ConfigError, DataError, LeakageError, MimlError
from miml.hausdorff import distance_matrix
from miml.imbalance import INDEPENDENCE_NOTE, OversampleConfig, is_synthetic, synthetic_negatives
from miml.kernel_svm import KernelSpec
from miml.medoid_embed import EmbeddedDataset, MedoidSet, embed, kmedoids
from miml.mlmetrics import EvalReport, all_metrics

log = logging.getLogger(__name__)

FORMAT_NAME = "miml-model"
FORMAT_VERSION = 1
SWEEP_AXES = ("svm.C", "cluster.k", "criterion.c_threshold", "oversample.n_bags")

# scene-scale data uses k=300, clinical-scale data k=7
LARGE_K, SMALL_K, LARGE_THRESHOLD = 300, 7, 1000


def svm_config_from(cfg: Mapping[str, Any]) -> SvmConfig:
    kernel = KernelSpec(cfg["svm.kernel"], cfg["svm.degree"], cfg["svm.coef0"], cfg["svm.gamma"])
    return SvmConfig(cfg["svm.C"], kernel, cfg["svm.tol"])


def ga_config_from(cfg: Mapping[str, Any]) -> GaConfig:
    return GaConfig(population_size=cfg["ga.population"], tournament_size=cfg["ga.tournament"],
                    max_mutation_length_change=cfg["ga.mutation_len"],
                    generations=cfg["ga.generations"], crossover_rate=cfg["ga.crossover_rate"],
                    mutation_rate=cfg["ga.mutation_rate"], stagnation=cfg["ga.stagnation"],
                    seed=cfg["ga.seed"])


def criterion_from(cfg: Mapping[str, Any]) -> BinarizationCriterion:
    return BinarizationCriterion(cfg["criterion.kind"], cfg["criterion.c_threshold"])


def oversample_from(cfg: Mapping[str, Any]) -> OversampleConfig:
    return OversampleConfig(cfg["oversample.n_bags"], cfg["oversample.max_bag_size"],
                            cfg["oversample.seed"])


def resolve_k(cfg: Mapping[str, Any], n_train: int) -> int:
    k = cfg["cluster.k"]
    if k is None:
        k = LARGE_K if n_train >= LARGE_THRESHOLD else SMALL_K
    return min(int(k), n_train)


def ga_validation_split(labels: np.ndarray, fraction: float, seed: int):
    """Hold out ``fraction`` of the bags, stratified by exact label set.

    Each label set contributes ``floor(size * fraction)`` bags; the remainder
    of the quota is drawn at random from what is left.
    """
    n = labels.shape[0]
    if n < 2:
        raise DataError("need at least two training bags for a validation split")
    rng = np.random.default_rng(seed)
    n_val = min(n - 1, max(1, int(round(n * fraction))))
    keys = [row.tobytes() for row in np.asarray(labels, dtype=np.int8)]
    groups: dict[bytes, list[int]] = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    val: list[int] = []
    rest: list[int] = []
    for key in sorted(groups):
        members = np.array(groups[key])[rng.permutation(len(groups[key]))]
        take = int(np.floor(len(members) * fraction))
        val.extend(members[:take].tolist())
        rest.extend(members[take:].tolist())
    rest = np.array(rest, dtype=np.int64)[rng.permutation(len(rest))]
    need = max(0, n_val - len(val))
    val.extend(rest[:need].tolist())
    val_idx = np.sort(np.array(val, dtype=np.int64))
    train_idx = np.setdiff1d(np.arange(n), val_idx)
    return train_idx, val_idx


def _embedded(ds: MimlDataset, z: np.ndarray, medoids: MedoidSet,
              oversample: OversampleConfig) -> EmbeddedDataset:
    extras = {}
    if oversample.n_extra_bags > 0:
        for label in range(ds.n_labels):
            bags = synthetic_negatives(ds, label, oversample)
            if bags:
                extras[label] = embed(bags, medoids)
    return EmbeddedDataset(z, ds.labels, tuple(ds.bag_ids), extras)


@dataclass
class TrainedModel:
    scaler: MinMaxScaler
    medoids: MedoidSet
    chain_model: ChainModel
    criterion: BinarizationCriterion
    config: dict
    label_names: tuple
    info: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def embed(self, ds: MimlDataset) -> np.ndarray:
        if ds.n_feat != self.scaler.mins.size:
            raise DataError(f"model expects {self.scaler.mins.size} features, data has {ds.n_feat}")
        return embed(self.scaler.transform(ds).bags, self.medoids)

    def predict(self, ds: MimlDataset) -> tuple[np.ndarray, np.ndarray]:
        """``(scores, binary labels)`` for every bag of ``ds``."""
        scores = predict_scores(self.chain_model, self.embed(ds))
        return scores, binarize(scores, self.criterion)


def fit_pipeline(train: MimlDataset, cfg: Mapping[str, Any]) -> TrainedModel:
    """Fit scaler, medoids, chain order and chain classifiers on ``train`` only."""
    if any(is_synthetic(b) for b in train.bag_ids):
        raise LeakageError("synthetic bags must not be passed in as training data")
    svm = svm_config_from(cfg)
    criterion = criterion_from(cfg)
    oversample = oversample_from(cfg)
    scaler = MinMaxScaler.fit(train)
    train_s = scaler.transform(train)
    k = resolve_k(cfg, train.n_bag)
    dist = distance_matrix(train_s.bags, cfg["distance.variant"]).values
    medoids = kmedoids(train_s.bags, k, cfg["cluster.seed"], cfg["cluster.max_iter"],
                       cfg["distance.variant"], dist=dist, n_init=cfg["cluster.n_init"])
    z = embed(train_s.bags, medoids)
    info: dict[str, Any] = {"k": k, "kmedoids_objective": list(medoids.objective_history)}

    if cfg["method"] == "chain-ga":
        tr_idx, va_idx = ga_validation_split(train.labels, cfg["ga.val_fraction"], cfg["ga.seed"])
        if np.intersect1d(tr_idx, va_idx).size:
            raise LeakageError("GA validation bags overlap GA training bags")
        sub = train_s.subset(tr_idx)
        Z_sub = _embedded(sub, z[tr_idx], medoids, oversample)
        Z_val = EmbeddedDataset(z[va_idx], train_s.labels[va_idx])
        result = ga_search(Z_sub, Z_val, ga_config_from(cfg), criterion, svm)
        chain = result.best
        info.update(ga_history=result.history, ga_best_fitness=result.best_fitness,
                    ga_evaluations=result.n_evaluations)
    else:
        chain = Chain.empty(train.n_labels)

    Z_full = _embedded(train_s, z, medoids, oversample)
    info["synthetic_bags"] = {str(l): int(len(r)) for l, r in sorted(Z_full.extra_negatives.items())}
    chain_model = train_chain(Z_full, chain, svm)
    return TrainedModel(scaler, medoids, chain_model, criterion, cfgmod.echo(cfg),
                        train.label_names, info)


def _check_fold(train: MimlDataset, test: MimlDataset) -> None:
    train_ids, test_ids = set(train.bag_ids), set(test.bag_ids)
    if train_ids & test_ids:
        raise LeakageError("bags shared between training and test fold")
    if any(is_synthetic(b) for b in test_ids):
        raise LeakageError("synthetic bag in an evaluation fold")


def _check_model(model: TrainedModel, train: MimlDataset) -> None:
    train_ids = set(train.bag_ids)
    if any(m.bag_id not in train_ids for m in model.medoids.medoids):
        raise LeakageError("medoid is not a training bag")


def run_fold(ds: MimlDataset, split: FoldSplit, fold: int, cfg: Mapping[str, Any]) -> dict:
    tr, te = split.train_test(fold)
    train, test = ds.subset(tr), ds.subset(te)
    _check_fold(train, test)
    try:
        model = fit_pipeline(train, cfg)
    except MimlError as exc:
        raise type(exc)(f"fold {fold}: {exc}") from exc
    _check_model(model, train)
    scores, pred = model.predict(test)
    metrics = all_metrics(test.labels, pred, scores)
    return {"fold": fold, "metrics": metrics, "chain": list(model.chain_model.chain.order),
            "info": model.info}


def _dataset_from(cfg: Mapping[str, Any]) -> MimlDataset:
    if not cfg["dataset.path"]:
        raise ConfigError("dataset.path is not set")
    return load_dataset(cfg["dataset.path"], cfg["dataset.format"])


def run_cv(cfg: Mapping[str, Any], dataset: MimlDataset | None = None,
           split: FoldSplit | None = None) -> EvalReport:
    """Cross-validate ``cfg`` and aggregate mean and std over folds."""
    cfg = cfgmod.complete(cfg)
    ds = dataset if dataset is not None else _dataset_from(cfg)
    split = split or split_folds(ds, cfg["cv.n_folds"], cfg["cv.seed"])
    folds = []
    for fold in range(split.n_folds):
        log.info("fold %d/%d", fold + 1, split.n_folds)
        folds.append(run_fold(ds, split, fold, cfg))
    per_fold = [{**f["metrics"], "fold": f["fold"], "chain_length": len(f["chain"])}
                for f in folds]
    chains = [f["chain"] for f in folds] if cfg["method"] == "chain-ga" else None
    metadata = {
        "n_bag": ds.n_bag, "n_labels": ds.n_labels, "n_feat": ds.n_feat,
        "fold_sizes": np.bincount(split.fold_assignments, minlength=split.n_folds).tolist(),
        "folds": [f["info"] for f in folds],
    }
    if cfg["oversample.n_bags"] > 0:
        metadata["oversampling_assumption"] = INDEPENDENCE_NOTE
    report = EvalReport.from_folds(per_fold, chains, method=cfg["method"],
                                   config=cfgmod.echo(cfg), metadata=metadata)
    if chains is None:
        report.chains = []
    return report


def sweep(cfg: Mapping[str, Any], axis: str, values: Sequence,
          dataset: MimlDataset | None = None) -> list[EvalReport]:
    """One ``run_cv`` per value of ``axis``, all on the same fold assignment."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfg = cfgmod.complete(cfg)
    ds = dataset if dataset is not None else _dataset_from(cfg)
    split = split_folds(ds, cfg["cv.n_folds"], cfg["cv.seed"])
    reports = []
    for value in values:
        run = dict(cfg)
        run[axis] = cfgmod.parse_value(axis, value) if isinstance(value, str) else value
        if axis == "criterion.c_threshold":
            run["criterion.kind"] = "C"
        reports.append(run_cv(run, ds, split))
    return reports


def report_json(report: EvalReport | Sequence[EvalReport]) -> str:
    """Deterministic serialization: sorted keys, no timestamps."""
    if isinstance(report, EvalReport):
        payload: Any = report.to_dict()
    else:
        payload = [r.to_dict() for r in report]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# persistence


def _probe_rows(model: TrainedModel) -> np.ndarray:
    return embed(list(model.medoids.medoids[:3]), model.medoids)


def model_to_dict(model: TrainedModel) -> dict:
    probe = _probe_rows(model)
    return {
        "format": FORMAT_NAME,
        "format_version": model.format_version,
        "scaler": model.scaler.to_dict(),
        "medoids": {
            "variant": model.medoids.variant,
            "indices": list(model.medoids.indices),
            "bags": [{"bag_id": b.bag_id, "instances": b.instances.tolist()}
                     for b in model.medoids.medoids],
        },
        "chain_model": model.chain_model.to_dict(),
        "criterion": {"kind": model.criterion.kind, "c_threshold": model.criterion.c_threshold},
        "label_names": list(model.label_names),
        "config": model.config,
        "info": model.info,
        "probe": {"z": probe.tolist(),
                  "scores": predict_scores(model.chain_model, probe).tolist()},
    }


def model_from_dict(d: dict) -> TrainedModel:
    if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
        raise DataError("not a miml model file")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"model format version {version} is not supported "
                        f"(this build reads version {FORMAT_VERSION})")
    try:
        med = d["medoids"]
        medoids = MedoidSet(tuple(Bag(b["bag_id"], np.array(b["instances"], dtype=np.float64))
                                  for b in med["bags"]),
                            tuple(med["indices"]), med["variant"])
        model = TrainedModel(MinMaxScaler.from_dict(d["scaler"]), medoids,
                             ChainModel.from_dict(d["chain_model"]),
                             BinarizationCriterion(**d["criterion"]), d["config"],
                             tuple(d["label_names"]), d.get("info", {}), version)
        probe_z = np.array(d["probe"]["z"], dtype=np.float64)
        expected = np.array(d["probe"]["scores"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"corrupt model file: {exc}") from None
    got = predict_scores(model.chain_model, probe_z) if probe_z.size else expected
    if got.shape != expected.shape or not np.array_equal(got, expected):
        raise DataError("corrupt model file: probe predictions do not match")
    return model


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n",
                          encoding="utf-8")


def load_model(path) -> TrainedModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt model file: {exc.msg}") from None
    return model_from_dict(d)


def train_model(cfg: Mapping[str, Any], dataset: MimlDataset | None = None) -> TrainedModel:
    cfg = cfgmod.complete(cfg)
    ds = dataset if dataset is not None else _dataset_from(cfg)
    return fit_pipeline(ds, cfg)


def write_predictions(model: TrainedModel, ds: MimlDataset, path) -> None:
    scores, pred = model.predict(ds)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for bag, s, p in zip(ds.bags, scores, pred):
            fh.write(json.dumps({"bag_id": bag.bag_id, "scores": s.tolist(),
                                 "labels": [int(v) for v in p]}) + "\n")
