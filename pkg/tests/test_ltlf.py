import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prefgames.ltlf import (AlphabetTooLargeError, Dfa, LtlfSyntaxError, UndeclaredAtomError, all_letters,
                            eval_word, last_value, minimize, parse_ltlf, progress, simplify, to_dfa)

from generators import rand_formula
from oracles import ltlf_sat_all


def words(ap, max_len):
    letters = all_letters(ap)
    for n in range(1, max_len + 1):
        yield from itertools.product(letters, repeat=n)


@pytest.mark.parametrize("text,size", [
    ("F d1 & G !o", 3),
    ("true", 2),
    ("false", 1),
    ("a", 3),
    ("X a", 4),
    ("a U b", 3),
])
def test_known_sizes(text, size):
    f = parse_ltlf(text)
    assert to_dfa(f, sorted(f.atoms())).n_states == size


def test_empty_word_rejected():
    d = to_dfa(parse_ltlf("true"), [])
    assert d.initial not in d.accepting
    with pytest.raises(ValueError):
        eval_word(parse_ltlf("true"), [])


def test_strong_next():
    f = parse_ltlf("X a")
    assert not eval_word(f, [{"a"}])
    assert eval_word(f, [set(), {"a"}])
    assert not eval_word(parse_ltlf("X true"), [set()])


def test_delivery_formula_semantics():
    f = parse_ltlf("F d1 & G !o")
    d = to_dfa(f, ["d1", "o"])
    assert d.accepts([set(), {"d1"}])
    assert not d.accepts([{"d1"}, {"o"}])
    assert not d.accepts([set()])


@pytest.mark.parametrize("text", ["F", "a &", "(a", "a b", "a U", "!", "a | | b", "G (a))", "3"])
def test_syntax_errors(text):
    with pytest.raises(LtlfSyntaxError):
        parse_ltlf(text)


def test_undeclared_atom():
    with pytest.raises(UndeclaredAtomError):
        parse_ltlf("F x", ["a"])
    with pytest.raises(UndeclaredAtomError):
        to_dfa(parse_ltlf("F x"), ["a"])


def test_alphabet_bound():
    with pytest.raises(AlphabetTooLargeError):
        to_dfa(parse_ltlf("a"), [f"x{i}" for i in range(13)])


def test_precedence_and_roundtrip():
    f = parse_ltlf("!a U b & c | X d")
    g = parse_ltlf(str(f))
    assert f == g
    for w in words(("a", "b", "c", "d"), 2):
        assert eval_word(f, w) == eval_word(g, w)


def test_progression_matches_semantics():
    rng = random.Random(7)
    ap = ("a", "b")
    for _ in range(60):
        f = rand_formula(rng, ap, 3)
        for w in words(ap, 3):
            head, rest = w[0], w[1:]
            expected = eval_word(f, w)
            if rest:
                assert eval_word(progress(f, head), rest) == expected
            else:
                assert last_value(f, head) == expected


def test_simplify_preserves_semantics():
    rng = random.Random(3)
    ap = ("a", "b")
    for _ in range(80):
        f = rand_formula(rng, ap, 4)
        g = simplify(f)
        assert all(eval_word(f, w) == eval_word(g, w) for w in words(ap, 3))


def _reachable_distinct(d: Dfa) -> bool:
    # Moore refinement from scratch; a minimal automaton has singleton blocks
    n = d.n_states
    block = [int(q in d.accepting) for q in range(n)]
    while True:
        sig = [(block[q],) + tuple(block[t] for t in d.delta[q]) for q in range(n)]
        ids = {s: i for i, s in enumerate(sorted(set(sig)))}
        new = [ids[s] for s in sig]
        if len(set(new)) == len(set(block)):
            break
        block = new
    return len(set(block)) == n


def test_output_is_minimal_and_canonical():
    rng = random.Random(11)
    for _ in range(80):
        ap = ("a", "b", "c")[:rng.randint(1, 3)]
        f = rand_formula(rng, ap, 4)
        d = to_dfa(f, ap)
        assert _reachable_distinct(d)
        assert minimize(d) == d
        assert d.initial == 0


def test_json_roundtrip():
    d = to_dfa(parse_ltlf("a U (b & X c)"), ["a", "b", "c"])
    assert Dfa.from_json(d.to_json()) == d
    assert d.dumps() == Dfa.from_json(d.to_json()).dumps()
    assert d.to_dot().startswith("digraph")


def test_oracle_equivalence_sample():
    rng = random.Random(5)
    for _ in range(100):
        ap = ("a", "b", "c")[:rng.randint(1, 3)]
        f = rand_formula(rng, ap, rng.randint(1, 4))
        d = to_dfa(f, ap)
        delta = np.array(d.delta)
        for n in range(1, 5):
            truth = ltlf_sat_all(f, d.letters, ap, n)
            idx = np.indices((len(d.letters),) * n).reshape(n, -1).T
            q = np.full(len(idx), d.initial)
            for j in range(n):
                q = delta[q, idx[:, j]]
            assert np.array_equal(np.isin(q, list(d.accepting)), truth)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_dfa_agrees_with_recursive_semantics(seed, depth):
    rng = random.Random(seed)
    ap = ("a", "b")
    f = rand_formula(rng, ap, depth)
    d = to_dfa(f, ap)
    for w in words(ap, 3):
        assert d.accepts(w) == eval_word(f, w)
