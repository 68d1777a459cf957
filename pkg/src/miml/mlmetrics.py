"""Multi-label evaluation metrics.

``Y`` is the true binary matrix (examples x labels), ``P`` a binarized
prediction of the same shape and ``S`` a real-valued score matrix.

Ranking conventions: the rank of label ``l`` in an example is the number of
labels scoring at least as high as ``l`` (1-based, pessimistic on ties).
Tied (relevant, irrelevant) pairs count one half in the ranking loss.
Examples on which a ranking metric is undefined are skipped: no relevant
label for one-error and coverage; no relevant or no irrelevant label for
ranking loss and average precision.  If every example is skipped the metric
returns its best value (0 for losses, 1 for average precision).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from miml.errors import DataError

LOSS_METRICS = ("hamming_loss", "rank_loss", "one_error", "coverage")
GAIN_METRICS = ("accuracy", "exact_match", "average_precision")
METRICS = ("hamming_loss", "accuracy", "exact_match", "rank_loss", "one_error",
           "coverage", "average_precision")


def _pair(Y, P, *, binary: bool):
    Y = np.asarray(Y)
    P = np.asarray(P)
    if Y.ndim != 2 or Y.shape != P.shape:
        raise DataError(f"shape mismatch: {Y.shape} vs {P.shape}")
    Y = Y.astype(bool)
    P = P.astype(bool) if binary else P.astype(np.float64)
    return Y, P


def hamming_loss(Y, P) -> float:
    Y, P = _pair(Y, P, binary=True)
    return float(np.mean(Y != P))


def accuracy_jaccard(Y, P) -> float:
    Y, P = _pair(Y, P, binary=True)
    inter = (Y & P).sum(axis=1)
    union = (Y | P).sum(axis=1)
    ratio = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    return float(ratio.mean())


def exact_match(Y, P) -> float:
    Y, P = _pair(Y, P, binary=True)
    return float(np.all(Y == P, axis=1).mean())


def _ranks(scores: np.ndarray) -> np.ndarray:
    # rank[i, l] = #{l' : s[i, l'] >= s[i, l]}
    return (scores[:, None, :] >= scores[:, :, None]).sum(axis=2)


def one_error(Y, S) -> float:
    Y, S = _pair(Y, S, binary=False)
    keep = Y.any(axis=1)
    if not keep.any():
        return 0.0
    top = np.argmax(S[keep], axis=1)
    return float(np.mean(~Y[keep][np.arange(top.size), top]))


def coverage(Y, S) -> float:
    Y, S = _pair(Y, S, binary=False)
    keep = Y.any(axis=1)
    if not keep.any():
        return 0.0
    ranks = _ranks(S[keep])
    worst = np.where(Y[keep], ranks, 0).max(axis=1)
    return float(np.mean(worst - 1))


def rank_loss(Y, S) -> float:
    Y, S = _pair(Y, S, binary=False)
    n_rel = Y.sum(axis=1)
    keep = (n_rel > 0) & (n_rel < Y.shape[1])
    if not keep.any():
        return 0.0
    Y, S, n_rel = Y[keep], S[keep], n_rel[keep]
    # pair (a relevant, b irrelevant): wrong if s_a < s_b, half if tied
    rel_irr = Y[:, :, None] & ~Y[:, None, :]
    diff = S[:, :, None] - S[:, None, :]
    bad = np.where(diff < 0, 1.0, np.where(diff == 0, 0.5, 0.0))
    per_example = (bad * rel_irr).sum(axis=(1, 2)) / (n_rel * (Y.shape[1] - n_rel))
    return float(per_example.mean())


def average_precision(Y, S) -> float:
    Y, S = _pair(Y, S, binary=False)
    n_rel = Y.sum(axis=1)
    keep = (n_rel > 0) & (n_rel < Y.shape[1])
    if not keep.any():
        return 1.0
    Y, S, n_rel = Y[keep], S[keep], n_rel[keep]
    at_least = S[:, None, :] >= S[:, :, None]
    ranks = at_least.sum(axis=2)
    rel_above = (at_least & Y[:, None, :]).sum(axis=2)
    prec = np.where(Y, rel_above / ranks, 0.0).sum(axis=1) / n_rel
    return float(prec.mean())


def all_metrics(Y, P, S) -> dict[str, float]:
    return {
        "hamming_loss": hamming_loss(Y, P),
        "accuracy": accuracy_jaccard(Y, P),
        "exact_match": exact_match(Y, P),
        "rank_loss": rank_loss(Y, S),
        "one_error": one_error(Y, S),
        "coverage": coverage(Y, S),
        "average_precision": average_precision(Y, S),
    }


def _mean_std(values) -> dict | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals))}


@dataclass
class EvalReport:
    """Cross-validated metrics: ``(mean, std)`` per metric plus raw per-fold values.

    ``avg_chain_length`` is ``None`` for the binary-relevance baseline, which
    has no chain.
    """

    metrics: dict
    per_fold: list
    avg_chain_length: dict | None = None
    chains: list = field(default_factory=list)
    method: str = "chain-ga"
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_folds(cls, per_fold: list[dict], chains: list | None = None, **kw) -> EvalReport:
        metrics = {m: _mean_std(f[m] for f in per_fold) for m in METRICS}
        cl = None
        if chains is not None:
            cl = _mean_std(len(c) for c in chains)
        return cls(metrics, per_fold, cl, [list(c) for c in (chains or [])], **kw)

    def mean(self, metric: str) -> float:
        return self.metrics[metric]["mean"]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "metrics": self.metrics,
            "avg_chain_length": self.avg_chain_length,
            "chains": self.chains,
            "per_fold": self.per_fold,
            "config": self.config,
            "metadata": self.metadata,
        }


_COLUMNS = [("HL", "hamming_loss"), ("ACC", "accuracy"), ("EM", "exact_match"),
            ("Rank Loss", "rank_loss"), ("One Error", "one_error"),
            ("Coverage", "coverage"), ("AP", "average_precision")]


def format_table(reports, row_labels=None, extra_column: str | None = None) -> str:
    """Plain-text table, one row per report, cells ``mean±std``; CL is "/" for the baseline."""
    header = ["Method"] + ([extra_column] if extra_column else []) + ["CL"] + [c for c, _ in _COLUMNS]
    rows = [header]
    for i, rep in enumerate(reports):
        method = "MIMLSVM" if rep.method == "mimlsvm-baseline" else "Ours"
        cells = [method]
        if extra_column:
            cells.append(str(row_labels[i]) if row_labels else "")
        cl = rep.avg_chain_length
        cells.append("/" if cl is None else f"{cl['mean']:.2f}±{cl['std']:.2f}")
        for _, key in _COLUMNS:
            ms = rep.metrics[key]
            cells.append(f"{ms['mean']:.4f}±{ms['std']:.4f}")
        rows.append(cells)
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
