"""Independent reference implementations used as test oracles.

Each one trades speed for obviousness: exhaustive enumeration or a generic
first-order QP method, sharing no code with the package.
"""

from fractions import Fraction
from itertools import combinations, permutations

import numpy as np


# ---------------------------------------------------------------------------
# SVM dual


def _project(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y'a = 0}.

    ``a(lam) = clip(v - lam*y, 0, C)`` and ``h(lam) = y'a(lam)`` is piecewise
    linear and non-increasing, so the root lies between two breakpoints and
    is found by linear interpolation.
    """
    bps = np.unique(np.concatenate([v * y, (v - C) * y]))
    h = np.clip(v[None, :] - bps[:, None] * y[None, :], 0.0, C) @ y
    if h[0] <= 0:
        lam = bps[0]
    elif h[-1] >= 0:
        lam = bps[-1]
    else:
        i = int(np.flatnonzero(h <= 0)[0])
        lam = bps[i - 1] + (bps[i] - bps[i - 1]) * h[i - 1] / (h[i - 1] - h[i])
    return np.clip(v - lam * y, 0.0, C)


def qp_dual_oracle(K, y, C, iters=20000):
    """Maximize ``sum(a) - 0.5 a'Qa`` by accelerated projected gradient (FISTA)."""
    Q = (y[:, None] * y[None, :]) * K
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    for _ in range(iters):
        a_next = _project(z - (Q @ z - 1.0) / L, y, C)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = a_next + ((t - 1) / t_next) * (a_next - a)
        if np.abs(a_next - a).max() < 1e-13:
            a = a_next
            break
        a, t = a_next, t_next
    return a, float(a.sum() - 0.5 * a @ Q @ a)


# ---------------------------------------------------------------------------
# k-medoids


def kmedoids_optimum(dist, k):
    """Smallest total distance to the nearest medoid over every k-subset."""
    n = dist.shape[0]
    return min(dist[:, list(c)].min(axis=1).sum() for c in combinations(range(n), k))


# ---------------------------------------------------------------------------
# multi-label metrics, as exact fractions


def _orders(scores):
    """All label orderings consistent with descending scores (ties in any order)."""
    L = len(scores)
    return [p for p in permutations(range(L))
            if all(scores[p[i]] >= scores[p[i + 1]] for i in range(L - 1))]


def _pessimistic_ranks(scores):
    orders = _orders(scores)
    return [max(o.index(l) for o in orders) + 1 for l in range(len(scores))]


def _mean(values, empty):
    values = list(values)
    return sum(values, Fraction(0)) / len(values) if values else Fraction(empty)


def hamming(Y, P):
    cells = [(y, p) for yr, pr in zip(Y, P) for y, p in zip(yr, pr)]
    return Fraction(sum(y != p for y, p in cells), len(cells))


def jaccard(Y, P):
    out = []
    for yr, pr in zip(Y, P):
        a = {l for l, v in enumerate(yr) if v}
        b = {l for l, v in enumerate(pr) if v}
        out.append(Fraction(1) if not a | b else Fraction(len(a & b), len(a | b)))
    return _mean(out, 1)


def exact(Y, P):
    return Fraction(sum(list(yr) == list(pr) for yr, pr in zip(Y, P)), len(Y))


def one_err(Y, S):
    out = []
    for yr, sr in zip(Y, S):
        if not any(yr):
            continue
        top = next(l for l in range(len(sr)) if sr[l] == max(sr))
        out.append(Fraction(0 if yr[top] else 1))
    return _mean(out, 0)


def cover(Y, S):
    out = []
    for yr, sr in zip(Y, S):
        if not any(yr):
            continue
        ranks = _pessimistic_ranks(sr)
        out.append(Fraction(max(r for r, v in zip(ranks, yr) if v) - 1))
    return _mean(out, 0)


def rankloss(Y, S):
    """Expected fraction of mis-ordered (relevant, irrelevant) pairs under a
    uniformly random tie-breaking order."""
    out = []
    for yr, sr in zip(Y, S):
        rel = [l for l, v in enumerate(yr) if v]
        irr = [l for l, v in enumerate(yr) if not v]
        if not rel or not irr:
            continue
        orders = _orders(sr)
        total = Fraction(0)
        for o in orders:
            bad = sum(o.index(a) > o.index(b) for a in rel for b in irr)
            total += Fraction(bad, len(rel) * len(irr))
        out.append(total / len(orders))
    return _mean(out, 0)


def avgprec(Y, S):
    out = []
    for yr, sr in zip(Y, S):
        rel = [l for l, v in enumerate(yr) if v]
        if not rel or len(rel) == len(yr):
            continue
        ranks = _pessimistic_ranks(sr)
        out.append(sum((Fraction(sum(ranks[m] <= ranks[l] for m in rel), ranks[l]) for l in rel),
                       Fraction(0)) / len(rel))
    return _mean(out, 1)


METRIC_ORACLES = {
    "hamming_loss": (hamming, "binary"),
    "accuracy": (jaccard, "binary"),
    "exact_match": (exact, "binary"),
    "one_error": (one_err, "score"),
    "coverage": (cover, "score"),
    "rank_loss": (rankloss, "score"),
    "average_precision": (avgprec, "score"),
}
