import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ilid.similarity import (
    PairwiseScores,
    UndefinedCorrelationError,
    aggregate,
    distance_similarity,
    pair_order,
    pairwise_scores,
    pearson,
)


def naive_pearson(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def test_pearson_worked_example():
    # centred vectors [-1,0,1] and [-4/3,-1/3,5/3]: 3 / sqrt(2 * 14/3)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(9 / math.sqrt(84), abs=1e-15)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)


def test_pearson_extremes():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0


def test_pearson_undefined():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])


def test_distance_examples():
    assert distance_similarity([0, 0], [3, 4], "euclidean") == pytest.approx(1 / 6, abs=1e-15)
    assert distance_similarity([0, 0], [3, 4], "manhattan") == 0.125
    assert distance_similarity([1, 2], [1, 2], "euclidean") == 1.0


def test_matches_naive_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        a, b = rng.normal(size=n) * rng.uniform(0.1, 10), rng.normal(size=n) + rng.uniform(-5, 5)
        assert abs(pearson(a, b) - naive_pearson(a, b)) <= 1e-12
        d2 = math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(a, b)))
        d1 = math.fsum(abs(x - y) for x, y in zip(a, b))
        assert abs(distance_similarity(a, b, "euclidean") - 1 / (1 + d2)) <= 1e-12
        assert abs(distance_similarity(a, b, "manhattan") - 1 / (1 + d1)) <= 1e-12


finite = st.floats(-100, 100, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30),
       st.floats(0.1, 10), st.floats(-10, 10))
def test_pearson_symmetry_and_affine_invariance(pairs, scale, shift):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    if np.std(a) < 1e-3 or np.std(b) < 1e-3:
        return
    r = pearson(a, b)
    assert -1.0 <= r <= 1.0
    assert r == pytest.approx(pearson(b, a), abs=1e-12)
    assert pearson(a * scale + shift, b) == pytest.approx(r, abs=1e-9)


@given(st.lists(finite, min_size=1, max_size=20))
def test_distance_similarity_range(values):
    a = np.array(values)
    b = a[::-1]
    for metric in ("euclidean", "manhattan"):
        s = distance_similarity(a, b, metric)
        assert 0.0 < s <= 1.0
        assert s == distance_similarity(b, a, metric)


def test_pair_order_lexicographic():
    assert pair_order(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_pairwise_scores_count_and_order():
    rng = np.random.default_rng(1)
    f = [rng.normal(size=5) for _ in range(4)]
    ps = pairwise_scores(f, "pearson")
    assert len(ps) == 6 and ps.pairs == pair_order(4)
    assert ps.scores[4] == pearson(f[1], f[3])


def test_identical_pair():
    assert list(pairwise_scores([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], "pearson").scores) == [1.0]


def test_mixed_lengths_rejected():
    with pytest.raises(ValueError, match="mixed lengths"):
        pairwise_scores([[1.0, 2.0], [1.0, 2.0, 3.0]], "euclidean")


def test_undefined_policy():
    f = [[1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [2.0, 4.0, 7.0]]
    with pytest.raises(UndefinedCorrelationError) as info:
        pairwise_scores(f, "pearson")
    assert info.value.pair == (0, 1)
    ps = pairwise_scores(f, "pearson", undefined="zero")
    assert list(ps.scores[:2]) == [0.0, 0.0] and ps.undefined_pairs == [(0, 1), (0, 2)]


def test_aggregate_examples():
    ps = PairwiseScores("pearson", [0.9, 0.8, 0.7, 0.6, 0.5, 0.4], pair_order(4))
    assert aggregate(ps, [0, 1]) == pytest.approx(0.85, abs=1e-15)
    assert aggregate(ps) == pytest.approx(0.65, abs=1e-15)
    with pytest.raises(ValueError):
        aggregate(ps, [])
    with pytest.raises(IndexError):
        aggregate(ps, [6])


def test_all_nonempty_subsets_of_six_scores():
    from itertools import combinations

    scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
    subsets = [c for r in range(1, 7) for c in combinations(range(6), r)]
    assert len(subsets) == 63
    for sub in subsets:
        assert aggregate(scores, sub) == pytest.approx(math.fsum(scores[i] for i in sub) / len(sub))
