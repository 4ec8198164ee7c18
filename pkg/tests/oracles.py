"""Independent reference computations used only by the tests.

Nothing here calls into the solver; the game is read through
``successors`` alone.
"""
from __future__ import annotations

import itertools
import random

import numpy as np


def _succ(g, v, own, opp, player):
    a1, a2 = (own, opp) if player == 1 else (opp, own)
    return {d for d, _ in g.successors(v, a1, a2)}


def _n_own(g, player):
    return (g.n1, g.n2) if player == 1 else (g.n2, g.n1)


def _lose_under(g, supports, target, player):
    """States where the opponent keeps the play out of ``target`` with positive
    probability once the player's supports are fixed (an MDP for the opponent)."""
    n = g.n_states
    _, n_opp = _n_own(g, player)

    def succ(v, b):
        out = set()
        for a in supports[v]:
            out |= _succ(g, v, a, b, player)
        return out

    safe = {v for v in range(n) if v not in target}
    while True:
        keep = {v for v in safe if any(succ(v, b) <= safe for b in range(n_opp))}
        if keep == safe:
            break
        safe = keep
    lose = set(safe)
    while True:
        more = {v for v in range(n) if v not in target and v not in lose
                and any(succ(v, b) & lose for b in range(n_opp))}
        if not more:
            return lose
        lose |= more


def aswin_by_supports(g, target, player=1) -> set:
    """Union over all memoryless support assignments of the states they win from."""
    target = set(target)
    n_own, _ = _n_own(g, player)
    subsets = [c for k in range(1, n_own + 1) for c in itertools.combinations(range(n_own), k)]
    free = [v for v in range(g.n_states) if v not in target]
    win = set(target)
    for choice in itertools.product(subsets, repeat=len(free)):
        sup = {v: subsets[0] for v in target}
        sup.update(zip(free, choice))
        lose = _lose_under(g, sup, target, player)
        win |= set(range(g.n_states)) - lose
    return win


def _matrix_value(q):
    """Value of 2x2 zero-sum games stacked on axis 0 (row player maximizes).

    The mixed-strategy formula is evaluated on ``1 - q`` so values close to 1
    keep their precision.
    """
    lower = q.min(axis=2).max(axis=1)
    upper = q.max(axis=1).min(axis=1)
    c = 1.0 - q
    den = c[:, 0, 0] + c[:, 1, 1] - c[:, 0, 1] - c[:, 1, 0]
    num = c[:, 0, 0] * c[:, 1, 1] - c[:, 0, 1] * c[:, 1, 0]
    safe = np.where(den == 0, 1.0, den)
    mixed = np.where(den != 0, 1.0 - num / safe, lower)
    return np.where(lower >= upper, lower, np.clip(mixed, lower, upper))


def reach_values(g, target, player=1, iterations=20000, init=None, tol=1e-15):
    """Value iteration for the maximal probability of reaching ``target``."""
    n = g.n_states
    P = np.zeros((n, 2, 2, n))
    for v in range(n):
        for a in range(2):
            for b in range(2):
                a1, a2 = (a, b) if player == 1 else (b, a)
                a1, a2 = min(a1, g.n1 - 1), min(a2, g.n2 - 1)
                for d, p in g.successors(v, a1, a2):
                    P[v, a, b, d] += float(p)
    tmask = np.zeros(n, dtype=bool)
    tmask[list(target)] = True
    x = np.zeros(n) if init is None else np.array(init, dtype=float)
    x[tmask] = 1.0
    for _ in range(iterations):
        y = _matrix_value(P @ x)
        y[tmask] = 1.0
        y = np.maximum(y, x)
        if np.max(np.abs(y - x)) < tol:
            x = y
            break
        x = y
    return x


def aswin_by_values(g, target, player=1, seed=0, threshold=1 - 1e-9, iterations=20000) -> set:
    """States whose reach value clears the threshold from three lower-bound starts:
    zero, an early iterate and a random scaling of that iterate."""
    rng = random.Random(seed)
    n = g.n_states
    early = reach_values(g, target, player, iterations=n)
    starts = [np.zeros(n), early, np.array([rng.random() for _ in range(n)]) * early]
    out = None
    for x0 in starts:
        vals = reach_values(g, target, player, iterations=iterations, init=x0)
        win = {v for v in range(n) if vals[v] >= threshold}
        if out is not None and win != out:
            raise AssertionError("value iteration disagrees across starting points")
        out = win
    return out


def ltlf_sat_all(f, letters, ap, length) -> np.ndarray:
    """Truth value at position 0 for every word of ``length`` over ``letters``,
    words enumerated in lexicographic letter-index order.

    Works bottom-up over subformulas with one boolean column per position, so
    it shares nothing with the recursive evaluator or the automaton.
    """
    nl = len(letters)
    idx = np.indices((nl,) * length).reshape(length, -1).T
    count = idx.shape[0]
    has = {a: np.array([a in letters[i] for i in range(nl)]) for a in ap}

    def go(g):
        op = g.op
        if op == "true":
            return np.ones((count, length), dtype=bool)
        if op == "false":
            return np.zeros((count, length), dtype=bool)
        if op == "atom":
            return has[g.name][idx]
        sub = [go(a) for a in g.args]
        if op == "not":
            return ~sub[0]
        if op == "and":
            return np.logical_and.reduce(sub)
        if op == "or":
            return np.logical_or.reduce(sub)
        out = np.zeros((count, length), dtype=bool)
        if op == "next":
            out[:, :-1] = sub[0][:, 1:]
            return out
        nxt_val = np.zeros(count, dtype=bool) if op != "always" else np.ones(count, dtype=bool)
        for i in range(length - 1, -1, -1):
            if op == "eventually":
                cur = sub[0][:, i] | nxt_val
            elif op == "always":
                cur = sub[0][:, i] & nxt_val
            else:
                cur = sub[1][:, i] | (sub[0][:, i] & nxt_val)
            out[:, i] = cur
            nxt_val = cur
        return out

    return go(f)[:, 0]


def sure_win(g, target) -> set:
    """States from which P1 reaches ``target`` surely, by backward induction.

    Only valid on games whose non-absorbing part is acyclic; there a single
    action that wins against every reply is all randomization could offer.
    """
    target = set(target)
    order = _topological(g)
    win = set()
    for v in reversed(order):
        if v in target:
            win.add(v)
            continue
        for a in range(g.n1):
            succs = [_succ(g, v, a, b, 1) for b in range(g.n2)]
            if all(s and s <= win and v not in s for s in succs):
                win.add(v)
                break
    return win


def _topological(g):
    n = g.n_states
    adj = [set() for _ in range(n)]
    for v in range(n):
        for a in range(g.n1):
            for b in range(g.n2):
                adj[v] |= {d for d, _ in g.successors(v, a, b) if d != v}
    seen, order = set(), []
    for root in range(n):
        if root in seen:
            continue
        stack = [(root, iter(sorted(adj[root])))]
        seen.add(root)
        while stack:
            v, it = stack[-1]
            for d in it:
                if d not in seen:
                    seen.add(d)
                    stack.append((d, iter(sorted(adj[d]))))
                    break
            else:
                stack.pop()
                order.append(v)
    return order[::-1]


def _strict(r, a, b):
    return r[a, b] and not r[b, a]


def prop2_holds(r, ranks) -> bool:
    """The three rank/preference implications, checked for every ordered pair."""
    n = len(ranks)
    for a in range(n):
        for b in range(n):
            if ranks[a] == ranks[b] and (_strict(r, a, b) or _strict(r, b, a)):
                return False
            if ranks[a] > ranks[b] and r[a, b]:
                return False
            if _strict(r, a, b) and not ranks[a] < ranks[b]:
                return False
    return True
