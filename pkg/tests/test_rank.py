import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prefgames.rank import (NotAPreorderError, RankAssignment, compute_ranks, max_elements, min_elements,
                            peel_ranks, rank_table_csv)

from generators import rand_preorder
from oracles import prop2_holds

# v1 > v2, v3 > v4, v5 > v4 (indices 0..4)
EXAMPLE = np.eye(5, dtype=bool)
for _i, _j in [(0, 1), (2, 3), (4, 3)]:
    EXAMPLE[_i, _j] = True


def strict(r, a, b):
    return r[a, b] and not r[b, a]


def test_max_elements_examples():
    chain = np.array([[1, 1, 1], [0, 1, 1], [0, 0, 1]], dtype=bool)
    assert max_elements({0, 1, 2}, chain) == {0}
    assert min_elements({0, 1, 2}, chain) == {2}
    assert max_elements({0, 1, 2}, np.eye(3, dtype=bool)) == {0, 1, 2}
    assert max_elements(range(5), EXAMPLE) == {0, 2, 4}
    with pytest.raises(ValueError):
        max_elements(set(), chain)


def test_example_ranks():
    r = compute_ranks(EXAMPLE)
    assert r.ranks.tolist() == [0, 1, 0, 1, 0]
    assert r.kmax == 1
    assert r.layers == [{0, 2, 4}, {1, 3}]
    t = compute_ranks(EXAMPLE.T)
    assert t.ranks.tolist() == [1, 0, 1, 0, 1]
    assert (r.ranks + t.ranks == 1).all()


def test_singleton():
    r = compute_ranks(np.ones((1, 1), dtype=bool))
    assert r.ranks.tolist() == [0] and r.kmax == 0


def test_rejects_non_preorders():
    with pytest.raises(NotAPreorderError):
        compute_ranks(np.zeros((2, 2), dtype=bool))
    with pytest.raises(NotAPreorderError):
        compute_ranks(np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=bool))


def test_indifference_classes_share_rank():
    r = np.array([[1, 1, 1], [1, 1, 1], [0, 0, 1]], dtype=bool)
    assert compute_ranks(r).ranks.tolist() == [0, 0, 1]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_prop2_and_peeling_agree(seed):
    r = rand_preorder(random.Random(seed))
    assert prop2_holds(r, compute_ranks(r).ranks)
    assert np.array_equal(compute_ranks(r).ranks, peel_ranks(r).ranks)


def test_layers_partition_and_are_maximal():
    rng = random.Random(1)
    for _ in range(100):
        r = rand_preorder(rng)
        ra = compute_ranks(r)
        seen = set()
        for k, layer in enumerate(ra.layers):
            assert layer and not (layer & seen)
            rest = set(range(len(ra))) - seen
            assert layer == max_elements(rest, r)
            seen |= layer
        assert seen == set(range(len(ra)))


def test_converse_falsifiers():
    r = EXAMPLE
    ranks = compute_ranks(r).ranks
    v2, v3, v5 = 1, 2, 4
    incomparable = lambda a, b: not r[a, b] and not r[b, a]  # noqa: E731
    # (1') incomparable yet different ranks
    assert incomparable(v2, v3) and ranks[v2] != ranks[v3]
    # (3') smaller rank without strict preference
    assert ranks[v3] < ranks[v2] and not strict(r, v3, v2)
    # (2') not weakly preferred, yet rank not larger
    assert not r[v3, v5] and not ranks[v3] > ranks[v5]


def test_constant_sum_is_not_universal():
    """Chain a > b > c beside an unrelated d: d tops both orders, so the sum
    of its two ranks is 0 while the maximum rank is 2."""
    r = np.eye(4, dtype=bool)
    r[0, 1] = r[1, 2] = r[0, 2] = True
    up, down = compute_ranks(r), compute_ranks(r.T)
    assert up.kmax == down.kmax == 2
    assert up[3] + down[3] == 0
    assert (up.ranks[:3] + down.ranks[:3] == 2).all()


def test_rank_table_csv():
    text = rank_table_csv(["a", "b"], RankAssignment(np.array([0, 1])), RankAssignment(np.array([1, 0])))
    assert text == "node,rank1,rank2\na,0,1\nb,1,0\n"
