from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from miml.errors import DataError
from miml.mlmetrics import (METRICS, EvalReport, accuracy_jaccard, all_metrics, average_precision,
                            coverage, exact_match, format_table, hamming_loss, one_error,
                            rank_loss)

from oracles import METRIC_ORACLES

FUNCS = {
    "hamming_loss": hamming_loss, "accuracy": accuracy_jaccard, "exact_match": exact_match,
    "one_error": one_error, "coverage": coverage, "rank_loss": rank_loss,
    "average_precision": average_precision,
}
SCORE_LEVELS = (0.1, 0.5, 0.9)


def exact_equal(value, oracle):
    return Fraction(value).limit_denominator(10 ** 6) == oracle


def exhaustive_rows(n_labels):
    """Every (true row, binary row, score row) with scores on a 3-level grid (ties included)."""
    rows = list(product((0, 1), repeat=n_labels))
    scores = list(product(SCORE_LEVELS, repeat=n_labels))
    return rows, scores


class TestHandExamples:
    def test_hamming(self):
        assert hamming_loss([[1, 0, 0], [0, 1, 1]], [[1, 1, 0], [0, 1, 0]]) == pytest.approx(2 / 6)
        assert hamming_loss([[1, 0]], [[0, 1]]) == 1.0

    def test_jaccard(self):
        assert accuracy_jaccard([[1, 1, 0]], [[0, 1, 1]]) == pytest.approx(1 / 3)
        assert accuracy_jaccard([[0, 0]], [[0, 0]]) == 1.0
        assert accuracy_jaccard([[1, 0]], [[0, 1]]) == 0.0

    def test_exact(self):
        assert exact_match([[1, 0], [0, 1]], [[1, 0], [1, 1]]) == 0.5

    def test_one_error_tie_breaks_low(self):
        assert one_error([[1, 0]], [[0.5, 0.5]]) == 0.0
        assert one_error([[0, 1]], [[0.5, 0.5]]) == 1.0

    def test_coverage(self):
        assert coverage([[1, 0, 0]], [[0.9, 0.5, 0.1]]) == 0.0
        assert coverage([[0, 0, 0, 0, 1]], [[0.9, 0.8, 0.7, 0.6, 0.1]]) == 4.0

    def test_rank_loss(self):
        assert rank_loss([[1, 0]], [[0.9, 0.1]]) == 0.0
        assert rank_loss([[1, 0]], [[0.1, 0.9]]) == 1.0
        assert rank_loss([[1, 0]], [[0.5, 0.5]]) == 0.5

    def test_average_precision(self):
        assert average_precision([[0, 0, 1, 0]], [[0.9, 0.8, 0.7, 0.1]]) == pytest.approx(1 / 3)
        assert average_precision([[1, 1, 0]], [[0.9, 0.8, 0.1]]) == 1.0

    def test_all_skipped_conventions(self):
        Y = np.zeros((2, 3), dtype=int)
        S = np.full((2, 3), 0.5)
        assert one_error(Y, S) == 0.0 and coverage(Y, S) == 0.0
        assert rank_loss(Y, S) == 0.0 and average_precision(Y, S) == 1.0

    def test_shape_mismatch(self):
        for f in FUNCS.values():
            with pytest.raises(DataError):
                f(np.zeros((2, 3)), np.zeros((3, 2)))


@pytest.mark.parametrize("n_labels", [1, 2, 3, 4])
def test_single_rows_exhaustive(n_labels):
    rows, scores = exhaustive_rows(n_labels)
    for y in rows:
        Y = [y]
        for p in rows:
            for name in ("hamming_loss", "accuracy", "exact_match"):
                oracle, _ = METRIC_ORACLES[name]
                assert exact_equal(FUNCS[name](Y, [p]), oracle(Y, [p])), (name, y, p)
        for s in scores:
            for name in ("one_error", "coverage", "rank_loss", "average_precision"):
                oracle, _ = METRIC_ORACLES[name]
                assert exact_equal(FUNCS[name](Y, [s]), oracle(Y, [s])), (name, y, s)


@pytest.mark.parametrize("n_labels", [1, 2, 3, 4])
def test_multi_example_fixtures(n_labels):
    rng = np.random.default_rng(n_labels)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        Y = rng.integers(0, 2, size=(n, n_labels)).tolist()
        P = rng.integers(0, 2, size=(n, n_labels)).tolist()
        S = rng.choice(SCORE_LEVELS, size=(n, n_labels)).tolist()
        for name, (oracle, kind) in METRIC_ORACLES.items():
            pred = P if kind == "binary" else S
            assert exact_equal(FUNCS[name](Y, pred), oracle(Y, pred)), (name, Y, pred)


label_mats = st.integers(1, 5).flatmap(lambda L: st.tuples(
    st.lists(st.lists(st.integers(0, 1), min_size=L, max_size=L), min_size=1, max_size=8),
    st.lists(st.lists(st.integers(0, 20).map(lambda v: v / 20), min_size=L, max_size=L),
             min_size=1, max_size=8)))


@settings(max_examples=100, deadline=None)
@given(data=label_mats, seed=st.integers(0, 1000))
def test_invariances(data, seed):
    Y, S = data
    n = min(len(Y), len(S))
    Y, S = np.array(Y[:n]), np.array(S[:n])
    P = (S > 0.5).astype(int)
    base = all_metrics(Y, P, S)
    # strictly monotone transform of scores
    moved = all_metrics(Y, P, np.exp(3 * S) - 7)
    for m in ("rank_loss", "one_error", "coverage", "average_precision"):
        assert moved[m] == pytest.approx(base[m])
    # consistent label permutation, with scores free of ties so argmax is unaffected
    perm = np.random.default_rng(seed).permutation(Y.shape[1])
    if all(len(set(r)) == len(r) for r in S.tolist()):
        permuted = all_metrics(Y[:, perm], P[:, perm], S[:, perm])
        for m in METRICS:
            assert permuted[m] == pytest.approx(base[m])
    for m in METRICS:
        hi = Y.shape[1] if m == "coverage" else 1.0
        assert 0.0 <= base[m] <= hi


def test_report_and_table():
    folds = [dict(all_metrics([[1, 0]], [[1, 0]], [[0.9, 0.1]]), fold=0),
             dict(all_metrics([[1, 0]], [[0, 1]], [[0.1, 0.9]]), fold=1)]
    rep = EvalReport.from_folds(folds, [[0, 1], [1]], method="chain-ga")
    assert rep.mean("hamming_loss") == 0.5
    assert rep.metrics["exact_match"]["std"] == 0.5
    assert rep.avg_chain_length == {"mean": 1.5, "std": 0.5}
    base = EvalReport.from_folds(folds, None, method="mimlsvm-baseline")
    table = format_table([rep, base])
    lines = table.splitlines()
    assert lines[0].split()[:3] == ["Method", "CL", "HL"]
    assert lines[3].split()[:2] == ["MIMLSVM", "/"]
