import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from miml.bagdata import Bag
from miml.errors import ConfigError, DataError
from miml.hausdorff import cross_distances, directed_hausdorff, distance_matrix, hausdorff

from conftest import random_bags


def brute_directed(a, b):
    worst = 0.0
    for p in a:
        best = min(float(np.sqrt(((p - q) ** 2).sum())) for q in b)
        worst = max(worst, best)
    return worst


def test_single_points():
    assert directed_hausdorff([[0, 0]], [[3, 4]]) == 5.0


def test_two_to_one():
    a, b = [[0, 0], [10, 0]], [[0, 0]]
    assert directed_hausdorff(a, b) == 10.0
    assert directed_hausdorff(b, a) == 0.0
    assert hausdorff(a, b) == 10.0


def test_subset_is_zero():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.vstack([a, [[9.0, 9.0]]])
    assert directed_hausdorff(a, b) == 0.0
    assert hausdorff(a, a) == 0.0


def test_feature_mismatch():
    with pytest.raises(DataError):
        hausdorff([[0, 0]], [[0, 0, 0]])
    with pytest.raises(DataError):
        distance_matrix([Bag("a", [[0.0]]), Bag("b", [[0.0, 1.0]])])


def test_unknown_variant():
    with pytest.raises(ConfigError):
        hausdorff([[0]], [[1]], variant="min")


def test_average_variant():
    a, b = [[0.0], [4.0]], [[0.0]]
    # directions: mean(0, 4) = 2 and mean(0) = 0
    assert hausdorff(a, b, "average") == 1.0


def test_matrix_trivial_cases():
    one = distance_matrix([Bag("a", [[1.0, 2.0]])])
    assert one.values.shape == (1, 1) and one.values[0, 0] == 0.0
    same = distance_matrix([Bag(str(i), [[1.0, 2.0], [0.0, 0.0]]) for i in range(4)])
    assert not same.values.any()


@pytest.mark.parametrize("variant", ["max", "average"])
def test_matrix_matches_pairwise(rng, variant):
    bags = random_bags(rng, 5, n_feat=3)
    m = distance_matrix(bags, variant)
    assert m.bag_ids == tuple(b.bag_id for b in bags)
    for i in range(5):
        for j in range(5):
            if i == j:
                assert m.values[i, j] == 0.0
            else:
                assert m.values[i, j] == pytest.approx(hausdorff(bags[i], bags[j], variant),
                                                       rel=1e-12)
    assert np.array_equal(m.values, m.values.T)


def test_cross_matches_pairwise_exactly(rng):
    rows, cols = random_bags(rng, 4), random_bags(rng, 3)
    d = cross_distances(rows, cols)
    assert d.shape == (4, 3)
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            assert d[i, j] == hausdorff(r, c)


points = arrays(np.float64, st.tuples(st.integers(1, 4), st.just(2)),
                elements=st.floats(-100, 100, allow_nan=False, width=64))


@settings(max_examples=200, deadline=None)
@given(a=points, b=points, c=points)
def test_metric_axioms(a, b, c):
    ab, ba = hausdorff(a, b), hausdorff(b, a)
    assert ab >= 0
    assert ab == ba
    assert hausdorff(a, a) == 0.0
    assert hausdorff(a, c) <= ab + hausdorff(b, c) + 1e-9


@settings(max_examples=100, deadline=None)
@given(a=points, b=points)
def test_against_brute_force(a, b):
    assert directed_hausdorff(a, b) == pytest.approx(brute_directed(a, b), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(a=points, b=points, seed=st.integers(0, 2**16))
def test_permutation_invariance(a, b, seed):
    perm = np.random.default_rng(seed)
    assert hausdorff(perm.permutation(a), perm.permutation(b)) == hausdorff(a, b)


@settings(max_examples=100, deadline=None)
@given(a=points, extra=points, b=points)
def test_monotone_containment(a, extra, b):
    bigger = np.vstack([a, extra])
    assert directed_hausdorff(a, b) <= directed_hausdorff(bigger, b)
