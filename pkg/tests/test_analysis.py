import random
from fractions import Fraction

import numpy as np
import pytest

from prefgames.analysis import (EnumerationBoundError, ImproperStrategyError, best_response, check_nash,
                                constant_sum_check, dominates_outcomes, enumerate_profiles, estimate_outcomes,
                                lemma3_check, lemma6_check, max_rank, min_set, outcome_set, report,
                                strategy_from_supports, strictly_dominates, verify_ndaswin)
from prefgames.game import ConcurrentGame, Strategy
from prefgames.preference import build_preference_automaton, parse_pref_spec
from prefgames.rank import RankAssignment
from prefgames.solver import ndaswin

from generators import products

T = Fraction(1)
SPEC = "formula win := F p\nformula ok := F q\npref win > ok"


def product(rows, n1, n2, labels):
    from prefgames.product import build_product
    names = ["s", "g", "b"][:len(labels)]
    g = ConcurrentGame.from_rows(names, [f"a{i}" for i in range(n1)], [f"b{i}" for i in range(n2)],
                                 rows, 0, ("p", "q"), [frozenset(x) for x in labels])
    return build_product(g, build_preference_automaton(parse_pref_spec(SPEC), g.ap))


@pytest.fixture
def fork():
    # s: a0 -> g (good), a1 -> b (fallback); g, b absorbing
    rows = [{1: T}, {2: T}] + [{1: T}] * 2 + [{2: T}] * 2
    return product(rows, 2, 1, [set(), {"p"}, {"q"}])


@pytest.fixture
def contested():
    # s: a0 lands on g or b as P2 picks, a1 -> b
    rows = [{1: T}, {2: T}, {2: T}, {2: T}] + [{1: T}] * 4 + [{2: T}] * 4
    return product(rows, 2, 2, [set(), {"p"}, {"q"}])


def state(h, name):
    return next(v for v in range(h.n_states) if h.states[v].startswith(f"({name},"))


def test_fork_ranks(fork):
    h = fork
    assert [h.rank1[state(h, x)] for x in "sgb"] == [2, 0, 1]
    assert constant_sum_check(h)


def test_stop_at_start(fork):
    h = fork
    om = outcome_set(h, Strategy(1, {}))
    assert om.states == {h.init}
    assert max_rank(h, Strategy(1, {})) == 2
    assert max_rank(h, Strategy(1, {}), player=2) == 0


def test_chain_ends_at_last_state():
    rows = [{1: T}, {2: T}, {2: T}]
    g = ConcurrentGame.from_rows(["s", "g", "b"], ["a"], ["c"], rows, 0, ("p", "q"),
                                 [frozenset(), frozenset(), frozenset({"q"})])
    from prefgames.product import build_product
    h = build_product(g, build_preference_automaton(parse_pref_spec(SPEC), g.ap))
    pi = Strategy.uniform(1, {state(h, "s"): [0], state(h, "g"): [0]})
    assert outcome_set(h, pi).states == {state(h, "b")}
    est = estimate_outcomes(h, pi, None, runs=50)
    assert est.histogram == {1: 50} and est.nonterminated == 0


def test_improper_strategy(fork):
    h = fork
    everywhere = Strategy.uniform(1, {v: [0] for v in range(h.n_states)})
    with pytest.raises(ImproperStrategyError):
        outcome_set(h, everywhere)


def test_ndaswin_profile_stays_in_region(fork, contested):
    for h in (fork, contested):
        res = ndaswin(h)
        om = outcome_set(h, res.strategy)
        assert all(res.region[v] for v in om)
        assert max(h.rank1[v] for v in om) <= res.level


def test_dominance_designed(fork):
    h = fork
    good = Strategy.uniform(1, {h.init: [0]})
    bad = Strategy.uniform(1, {h.init: [1]})
    assert strictly_dominates(h, (good, None), (bad, None))
    assert not strictly_dominates(h, (bad, None), (good, None))
    assert not strictly_dominates(h, (good, None), (good, None))


def test_verify_ndaswin_accepts_solver_and_rejects_worse(fork):
    h = fork
    res = ndaswin(h)
    assert res.level == 0
    assert verify_ndaswin(h, res.strategy)
    worse = Strategy.uniform(1, {h.init: [1]})
    out = verify_ndaswin(h, worse)
    assert not out and out.witness["reason"] == "dominating P1 deviation"
    doc = report("ndaswin", "fork", out)
    assert doc["result"] is False and doc["witness"]["outcomes"]


def test_check_nash(fork, contested):
    h = fork
    assert check_nash(h, ndaswin(h).strategy, ndaswin(h, 2).strategy)
    lazy = Strategy.uniform(1, {h.init: [1]})
    out = check_nash(h, lazy, ndaswin(h, 2).strategy)
    assert not out and out.witness["reason"] == "profitable deviation for P1"


def test_solver_pair_is_not_always_an_equilibrium(contested):
    # v0 is already P2's best class, so P2's own solve is vacuous (full support);
    # committing to b1 pushes every outcome onto b, which P2 strictly prefers
    h = contested
    out = check_nash(h, ndaswin(h).strategy, ndaswin(h, 2).strategy)
    assert not out
    assert out.witness["reason"] == "profitable deviation for P2"
    assert out.witness["outcomes"] == [h.states[state(h, "b")]]


def test_single_state_game():
    g = ConcurrentGame.from_rows(["s"], ["a"], ["c"], [{0: T}], 0, ("p", "q"), [frozenset()])
    from prefgames.product import build_product
    h = build_product(g, build_preference_automaton(parse_pref_spec(SPEC), g.ap))
    stop = Strategy(1, {})
    assert verify_ndaswin(h, stop)
    assert check_nash(h, stop, None)
    assert outcome_set(h, stop).states == {h.init}


def test_bounds(contested):
    with pytest.raises(EnumerationBoundError):
        verify_ndaswin(contested, Strategy(1, {}), bounds=(2, 2))


def test_best_response_and_lemma6(contested):
    h = contested
    res = ndaswin(h)
    assert res.level == 1
    br = best_response(h, res.strategy)
    # hurting P1 means steering a0 onto b
    assert br.support(h.init) == (1,)
    assert max_rank(h, res.strategy, br) == 1
    chk = lemma6_check(h, res.strategy, res.level)
    assert chk and chk.details == {"best_max_rank2": 1, "expected": 1}


def test_estimates_are_seeded(contested):
    h = contested
    pi = ndaswin(h).strategy
    a = estimate_outcomes(h, pi, None, runs=200, seed=5)
    assert a == estimate_outcomes(h, pi, None, runs=200, seed=5)
    assert a.max_rank <= 1 and a.fraction_at_most(1) == 1.0
    with pytest.raises(ValueError):
        estimate_outcomes(h, pi, None, runs=0)


def test_constant_sum_negative_control(fork):
    h = fork
    broken = RankAssignment(np.where(np.arange(h.n_states) == 0, h.rank1.ranks + 1, h.rank1.ranks), h.rank1.kmax)
    assert not constant_sum_check(h, rank1=broken)


def random_profiles(h, rng, count):
    found = []
    for a, b, seen, edges, stops in enumerate_profiles(h):
        if rng.random() < 0.3:
            try:
                outcome_set(h, strategy_from_supports(1, a), strategy_from_supports(2, b))
            except ImproperStrategyError:
                continue
            found.append(frozenset(stops))
        if len(found) >= count:
            break
    return found


def test_dominance_irreflexive_and_asymmetric():
    rng = random.Random(3)
    for h in products(13, 25, max_v=5):
        omegas = random_profiles(h, rng, 8)
        for a in omegas:
            assert not dominates_outcomes(h, a, a)
            for b in omegas:
                assert not (dominates_outcomes(h, a, b) and dominates_outcomes(h, b, a))


def test_min_set_and_lemma3():
    rng = random.Random(4)
    for h in products(17, 25, max_v=5):
        res = ndaswin(h)
        assert lemma3_check(h, res.strategy)
        for om in random_profiles(h, rng, 6):
            mins = min_set(h, om)
            assert mins and mins <= om
            top = max(h.rank1[v] for v in om)
            assert {v for v in om if h.rank1[v] == top} <= mins
