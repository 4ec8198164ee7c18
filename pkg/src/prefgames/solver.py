"""Almost-sure reachability in concurrent games and rank-level synthesis.

The region is the nested fixpoint ``nu Y. mu X. (T & Y) | apre(Y, X)``.
Only supports matter, so everything works on boolean row masks:
``row_all(M)[r]`` says every successor of row ``r`` is in ``M`` and
``row_any(M)[r]`` that some successor is.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .game import ConcurrentGame, Strategy

__all__ = [
    "SolveResult", "safe_support", "safe_support_matrix", "apre", "aswin", "ndaswin",
    "strategy_json", "as_mask",
]


def as_mask(h: ConcurrentGame, states) -> np.ndarray:
    if isinstance(states, np.ndarray) and states.dtype == bool:
        return states
    m = np.zeros(h.n_states, dtype=bool)
    m[list(states)] = True
    return m


def _row_all(h: ConcurrentGame, mask: np.ndarray) -> np.ndarray:
    return np.logical_and.reduceat(mask[h.dst], h.ptr[:-1])


def _row_any(h: ConcurrentGame, mask: np.ndarray) -> np.ndarray:
    return np.logical_or.reduceat(mask[h.dst], h.ptr[:-1])


def _cube(h: ConcurrentGame, rows: np.ndarray, player: int) -> np.ndarray:
    """Row mask as ``[state, own action, opponent action]``."""
    c = rows.reshape(h.n_states, h.n1, h.n2)
    return c if player == 1 else c.transpose(0, 2, 1)


def safe_support_matrix(h: ConcurrentGame, Y, player: int = 1) -> np.ndarray:
    """``S[v, a]``: action ``a`` keeps every successor in ``Y`` whatever the opponent does."""
    Y = as_mask(h, Y)
    return _cube(h, _row_all(h, Y), player).all(axis=2) & Y[:, None]


def safe_support(h: ConcurrentGame, v: int, Y, player: int = 1) -> set:
    Y = as_mask(h, Y)
    if not Y[v]:
        raise ValueError("state must belong to Y")
    return set(np.flatnonzero(safe_support_matrix(h, Y, player)[v]).tolist())


def _apre(h, S: np.ndarray, X: np.ndarray, candidates: np.ndarray, player: int) -> np.ndarray:
    hit = _cube(h, _row_any(h, X), player)
    # every opponent reply leaves some safe action with a successor in X
    good = (hit & S[:, :, None]).any(axis=1).all(axis=1)
    return candidates & S.any(axis=1) & good


def apre(h: ConcurrentGame, Y, X, target, player: int = 1) -> np.ndarray:
    Y, X, T = as_mask(h, Y), as_mask(h, X), as_mask(h, target)
    return _apre(h, safe_support_matrix(h, Y, player), X, Y & ~T, player)


@dataclass
class SolveResult:
    player: int
    region: np.ndarray
    target: np.ndarray
    support: np.ndarray
    strategy: Strategy
    level: int | None = None
    aswin_calls: int = 1
    outer_iterations: int = 0
    inner_iterations: int = 0
    levels_tried: list = field(default_factory=list)

    def wins(self, v: int) -> bool:
        return bool(self.region[v])


def _strategy_from_support(support: np.ndarray, active: np.ndarray, player: int) -> Strategy:
    table = {}
    for v in np.flatnonzero(active).tolist():
        acts = np.flatnonzero(support[v]).tolist()
        p = Fraction(1, len(acts))
        table[v] = {a: p for a in acts}
    return Strategy(player, table)


def aswin(h: ConcurrentGame, target, player: int = 1) -> SolveResult:
    """Almost-sure winning region for reaching ``target`` and a uniform-support strategy."""
    T = as_mask(h, target)
    Y = np.ones(h.n_states, dtype=bool)
    outer = inner = 0
    while True:
        outer += 1
        S = safe_support_matrix(h, Y, player)
        X = T & Y
        cand = Y & ~T
        while True:
            inner += 1
            nxt = X | _apre(h, S, X, cand & ~X, player)
            if nxt.sum() == X.sum():
                break
            X = nxt
        if X.sum() == Y.sum():
            break
        Y = X
    S = safe_support_matrix(h, Y, player)
    active = Y & ~T
    return SolveResult(player, Y, T, S & active[:, None], _strategy_from_support(S, active, player),
                       outer_iterations=outer, inner_iterations=inner)


def ndaswin(h, player: int = 1) -> SolveResult:
    """Smallest rank level ``k`` the player can reach almost surely from the initial state."""
    ranks = h.ranks(player)
    r = ranks.ranks
    calls = outer = inner = 0
    tried = []
    for k in range(ranks.kmax + 1):
        res = aswin(h, r <= k, player)
        calls += 1
        outer += res.outer_iterations
        inner += res.inner_iterations
        tried.append(k)
        if res.region[h.init]:
            res.level = k
            res.aswin_calls = calls
            res.outer_iterations, res.inner_iterations = outer, inner
            res.levels_tried = tried
            return res
    raise AssertionError("initial state not winning at its own rank")  # pragma: no cover


def strategy_json(h: ConcurrentGame, res: SolveResult) -> dict:
    d = res.strategy.to_json(h)
    d["level_k"] = res.level
    d["region"] = [h.states[v] for v in np.flatnonzero(res.region).tolist()]
    return d
