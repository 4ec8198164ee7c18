"""Checks on strategy profiles: outcome sets, dominance, non-dominance, equilibria.

A profile is evaluated on supports only.  P1 owns termination: the play
stops exactly where P1's strategy is undefined.  Where P2's strategy is
undefined P2 is taken to play every action.  The outcome set is the set of
stop states reachable through supported transitions.

Exhaustive checks enumerate support strategies lazily: a state only gets a
choice once it becomes reachable, so two strategies that differ only on
unreachable states are never both visited.
"""
from __future__ import annotations

import itertools
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from .game import STOPPED, Strategy, sample_path

__all__ = [
    "OutcomeSet", "ImproperStrategyError", "EnumerationBoundError", "CheckResult", "Estimate",
    "outcome_set", "max_rank", "min_set", "strictly_dominates", "dominates_outcomes",
    "verify_ndaswin", "check_nash", "lemma6_check", "estimate_outcomes", "constant_sum_check", "lemma3_check",
    "support_profile", "strategy_from_supports", "enumerate_profiles", "report", "best_response",
]

STOP = None


class ImproperStrategyError(ValueError):
    def __init__(self, state, message=None):
        self.state = state
        super().__init__(message or f"state {state} is reachable but no stop state is reachable from it")


class EnumerationBoundError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeSet:
    states: frozenset
    ranks: dict

    def __iter__(self):
        return iter(sorted(self.states))

    def __len__(self):
        return len(self.states)

    def __contains__(self, v):
        return v in self.states


def support_profile(h, strategy: Strategy | None, player: int) -> dict:
    """``{state: support tuple or None}`` over all states."""
    out = {}
    for v in range(h.n_states):
        sup = strategy.support(v) if strategy is not None else None
        if player == 2 and sup is None:
            sup = tuple(range(h.n2))
        out[v] = sup
    return out


def strategy_from_supports(player: int, supports: Mapping) -> Strategy:
    return Strategy.uniform(player, {v: s for v, s in supports.items() if s is not None})


class _Succ:
    """Cached successor sets of tiny products."""

    def __init__(self, h):
        self.h = h
        self.cache = {}

    def __call__(self, v, s1, s2):
        key = (v, s1, s2)
        out = self.cache.get(key)
        if out is None:
            out = sorted({int(d) for a in s1 for b in s2 for d in self.h.succ_states(v, a, b)})
            self.cache[key] = out
        return out


def _explore(h, succ, p1: Mapping, p2: Mapping):
    """BFS under a partial profile.  Returns ``(pending, reached, edges, stops)``
    where ``pending`` is ``(player, state)`` of the first missing choice."""
    v0 = h.init
    seen = {v0}
    order = deque([v0])
    edges = {}
    stops = set()
    while order:
        v = order.popleft()
        if v not in p1:
            return (1, v), seen, edges, stops
        s1 = p1[v]
        if s1 is STOP:
            stops.add(v)
            continue
        if v not in p2:
            return (2, v), seen, edges, stops
        nxt = succ(v, s1, p2[v])
        edges[v] = nxt
        for d in nxt:
            if d not in seen:
                seen.add(d)
                order.append(d)
    return None, seen, edges, stops


def _improper_state(seen, edges, stops):
    """A reachable state from which no stop state is reachable, or None."""
    back = {}
    for v, ds in edges.items():
        for d in ds:
            back.setdefault(d, []).append(v)
    good = set(stops)
    order = deque(stops)
    while order:
        v = order.popleft()
        for u in back.get(v, ()):
            if u not in good:
                good.add(u)
                order.append(u)
    bad = sorted(seen - good)
    return bad[0] if bad else None


def _outcome(h, seen, edges, stops) -> OutcomeSet:
    bad = _improper_state(seen, edges, stops)
    if bad is not None:
        raise ImproperStrategyError(bad)
    return OutcomeSet(frozenset(stops), {v: (h.rank1[v], h.rank2[v]) for v in stops})


def outcome_set(h, pi1: Strategy, pi2: Strategy | None = None) -> OutcomeSet:
    succ = _Succ(h)
    pending, seen, edges, stops = _explore(h, succ, support_profile(h, pi1, 1), support_profile(h, pi2, 2))
    assert pending is None
    return _outcome(h, seen, edges, stops)


def max_rank(h, pi1: Strategy, pi2: Strategy | None = None, player: int = 1) -> int:
    ranks = h.ranks(player)
    return max(ranks[v] for v in outcome_set(h, pi1, pi2).states)


def _strict(h, u, v, player):
    return h.weak(u, v, player) and not h.weak(v, u, player)


def min_set(h, states, player: int = 1) -> set:
    """Members of ``states`` with nothing in ``states`` strictly worse for ``player``."""
    states = sorted(states)
    return {u for u in states if not any(_strict(h, u, w, player) for w in states)}


def dominates_outcomes(h, omega_a, omega_b, player: int = 1) -> bool:
    """Profile with outcomes ``omega_a`` strictly dominates one with ``omega_b``."""
    ma, mb = min_set(h, omega_a, player), min_set(h, omega_b, player)
    if any(_strict(h, b, a, player) for a in ma for b in mb):
        return False
    return any(_strict(h, a, b, player) for a in ma for b in mb)


def strictly_dominates(h, profile_a, profile_b, player: int = 1) -> bool:
    oa = outcome_set(h, *profile_a).states
    ob = outcome_set(h, *profile_b).states
    return dominates_outcomes(h, oa, ob, player)


def _options(n: int, with_stop: bool) -> list:
    subsets = [c for k in range(1, n + 1) for c in itertools.combinations(range(n), k)]
    return ([STOP] if with_stop else []) + subsets


def enumerate_profiles(h, p1: Mapping | None = None, p2: Mapping | None = None) -> Iterator:
    """All support profiles extending the partial maps ``p1``/``p2`` on reachable states.

    Yields ``(p1, p2, seen, edges, stops)`` with choices fixed only on states
    that matter.  Pass a total map to fix a player.
    """
    succ = _Succ(h)
    opts = {1: _options(h.n1, True), 2: _options(h.n2, False)}
    stack = [(dict(p1 or {}), dict(p2 or {}))]
    while stack:
        a, b = stack.pop()
        pending, seen, edges, stops = _explore(h, succ, a, b)
        if pending is None:
            yield a, b, seen, edges, stops
            continue
        player, v = pending
        for o in reversed(opts[player]):
            if player == 1:
                stack.append(({**a, v: o}, b))
            else:
                stack.append((a, {**b, v: o}))


def _check_bounds(h, bounds):
    max_states, max_actions = bounds
    if h.n_states > max_states or h.n1 > max_actions or h.n2 > max_actions:
        raise EnumerationBoundError(
            f"instance has {h.n_states} states and {h.n1}x{h.n2} actions; bounds are {max_states} states, "
            f"{max_actions} actions")


@dataclass
class CheckResult:
    check: str
    ok: bool
    witness: dict | None = None
    explored: int = 0
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def _describe(h, p1, p2, stops) -> dict:
    def name(player, sup):
        if sup is None:
            return "stop"
        return [h.actions(player)[a] for a in sup]
    return {
        "p1": {h.states[v]: name(1, s) for v, s in sorted(p1.items())},
        "p2": {h.states[v]: name(2, s) for v, s in sorted(p2.items())},
        "outcomes": [h.states[v] for v in sorted(stops)],
    }


def verify_ndaswin(h, pi1: Strategy, bounds=(6, 2)) -> CheckResult:
    """No P2 support strategy admits a P1 strategy whose profile strictly dominates."""
    _check_bounds(h, bounds)
    fixed1 = support_profile(h, pi1, 1)
    explored = 0
    for _, q2, seen, edges, stops in enumerate_profiles(h, fixed1, {}):
        try:
            base = _outcome(h, seen, edges, stops).states
        except ImproperStrategyError as exc:
            return CheckResult("ndaswin", False, {"reason": "candidate not proper", "state": h.states[exc.state],
                                                  **_describe(h, fixed1, q2, stops)}, explored)
        for a, b, seen2, edges2, stops2 in enumerate_profiles(h, {}, q2):
            explored += 1
            if _improper_state(seen2, edges2, stops2) is not None:
                continue
            if dominates_outcomes(h, stops2, base, 1):
                return CheckResult("ndaswin", False, {
                    "reason": "dominating P1 deviation",
                    "candidate_outcomes": [h.states[v] for v in sorted(base)],
                    **_describe(h, a, b, stops2)}, explored)
    return CheckResult("ndaswin", True, None, explored)


def check_nash(h, pi1: Strategy, pi2: Strategy | None, bounds=(6, 2)) -> CheckResult:
    """Neither player has a unilateral deviation whose profile strictly dominates
    the candidate under that player's own preorder."""
    _check_bounds(h, bounds)
    f1, f2 = support_profile(h, pi1, 1), support_profile(h, pi2, 2)
    base = outcome_set(h, pi1, pi2).states
    explored = 0
    for player, start in ((1, ({}, f2)), (2, (f1, {}))):
        for a, b, seen, edges, stops in enumerate_profiles(h, *start):
            explored += 1
            if _improper_state(seen, edges, stops) is not None:
                continue
            if dominates_outcomes(h, stops, base, player):
                return CheckResult("nash", False, {
                    "reason": f"profitable deviation for P{player}",
                    "candidate_outcomes": [h.states[v] for v in sorted(base)],
                    **_describe(h, a, b, stops)}, explored)
    return CheckResult("nash", True, None, explored)


def lemma3_check(h, pi1: Strategy, pi2: Strategy | None = None) -> CheckResult:
    """Every maximum-rank outcome is minimal in the outcome set."""
    omega = outcome_set(h, pi1, pi2).states
    top = max(h.rank1[v] for v in omega)
    mins = min_set(h, omega, 1)
    bad = [v for v in sorted(omega) if h.rank1[v] == top and v not in mins]
    return CheckResult("lemma3", not bad, {"states": [h.states[v] for v in bad]} if bad else None)


def lemma6_check(h, pi1: Strategy, k: int, bounds=(6, 2)) -> CheckResult:
    """Against ``pi1`` the best P2 support strategy gets worst-case P2 rank ``kmax - k``."""
    _check_bounds(h, bounds)
    fixed1 = support_profile(h, pi1, 1)
    r2 = h.rank2
    best = None
    explored = 0
    for _, _, seen, edges, stops in enumerate_profiles(h, fixed1, {}):
        explored += 1
        if _improper_state(seen, edges, stops) is not None:
            continue
        worst = max(r2[v] for v in stops)
        best = worst if best is None else min(best, worst)
    expected = r2.kmax - k
    return CheckResult("lemma6", best == expected, None if best == expected else
                       {"best_max_rank2": best, "expected": expected}, explored,
                       {"best_max_rank2": best, "expected": expected})


def constant_sum_check(h, rank1=None, rank2=None) -> bool:
    r1 = h.rank1 if rank1 is None else rank1
    r2 = h.rank2 if rank2 is None else rank2
    a1, a2 = np.asarray(r1.ranks), np.asarray(r2.ranks)
    if r1.kmax != r2.kmax:
        return False
    return bool(np.all(a1 + a2 == r1.kmax))


@dataclass
class Estimate:
    runs: int
    histogram: dict
    nonterminated: int
    max_rank: int | None

    def fraction_at_most(self, k: int) -> float:
        return sum(c for r, c in self.histogram.items() if r <= k) / self.runs


def estimate_outcomes(h, pi1: Strategy, pi2: Strategy | None, runs: int = 1000, seed: int = 0,
                      horizon: int = 1000, player: int = 1) -> Estimate:
    """Seeded rollouts; histogram of the player's rank where P1 stopped."""
    if runs < 1:
        raise ValueError("runs must be positive")
    rng = random.Random(seed)
    ranks = h.ranks(player)
    hist = Counter()
    cut = 0
    for _ in range(runs):
        path, reason = sample_path(h, pi1, pi2, seed=rng.getrandbits(63), max_steps=horizon)
        if reason == STOPPED:
            hist[ranks[path[-1]]] += 1
        else:
            cut += 1
    return Estimate(runs, dict(sorted(hist.items())), cut, max(hist) if hist else None)


def best_response(h, pi1: Strategy, player: int = 1, tol: float = 1e-12, max_iter: int = 100_000) -> Strategy:
    """Deterministic P2 strategy maximizing the expected ``player`` rank where ``pi1`` stops.

    Against a fixed P1 strategy P2 faces an MDP; value iteration from zero
    gives the optimal expected stop rank, and P2 picks a maximizing action.
    """
    n, n1, n2 = h.n_states, h.n1, h.n2
    w1 = np.zeros((n, n1))
    stop = np.ones(n, dtype=bool)
    for v, dist in pi1.table.items():
        stop[v] = False
        for a, p in dist.items():
            w1[v, a] = float(p)
    reward = np.asarray(h.ranks(player).ranks, dtype=float)
    probs = h.float_probs
    starts = h.ptr[:-1]
    value = np.where(stop, reward, 0.0)
    for _ in range(max_iter):
        row = np.add.reduceat(probs * value[h.dst], starts).reshape(n, n1, n2)
        q = np.einsum("va,vab->vb", w1, row)
        nxt = np.where(stop, reward, q.max(axis=1))
        done = np.max(np.abs(nxt - value)) < tol
        value = nxt
        if done:
            break
    choice = q.argmax(axis=1)
    return Strategy(2, {v: {int(choice[v]): Fraction(1)} for v in np.flatnonzero(~stop).tolist()})


def report(check: str, instance: str, result) -> dict:
    if isinstance(result, CheckResult):
        return {"check": check, "instance": instance, "result": bool(result), "witness": result.witness}
    return {"check": check, "instance": instance, "result": bool(result), "witness": None}
