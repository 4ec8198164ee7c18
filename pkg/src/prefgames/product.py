"""Product of a concurrent game with a preference automaton.

A product state is a pair ``(s, q)``; moving to ``s'`` updates ``q`` with the
label of ``s'``.  Both players compare product states through ``q`` only, P2
with the transposed relation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .game import ConcurrentGame
from .preference import Comparison, PreferenceAutomaton
from .rank import RankAssignment, product_ranks

__all__ = ["ProductGame", "ProductError", "build_product", "trace_in_product", "letter_indices"]


class ProductError(ValueError):
    pass


@dataclass(eq=False)
class ProductGame(ConcurrentGame):
    game: ConcurrentGame | None = None
    pa: PreferenceAutomaton | None = None
    s_of: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    q_of: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    inits: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))

    @cached_property
    def pair_index(self) -> dict:
        return {(s, q): v for v, (s, q) in enumerate(zip(self.s_of.tolist(), self.q_of.tolist()))}

    def pair(self, v: int) -> tuple:
        return int(self.s_of[v]), int(self.q_of[v])

    def weak(self, u: int, v: int, player: int = 1) -> bool:
        """``u`` weakly preferred to ``v`` by ``player``."""
        if player == 2:
            u, v = v, u
        return self.pa.weak(int(self.q_of[u]), int(self.q_of[v]))

    def compare(self, u: int, v: int, player: int = 1) -> Comparison:
        return Comparison.from_weak(self.weak(u, v, player), self.weak(v, u, player))

    def preorder(self, player: int = 1, max_states: int = 5000) -> np.ndarray:
        """Dense relation matrix over product states (guarded; small products only)."""
        if self.n_states > max_states:
            raise ProductError(f"dense preorder over {self.n_states} states exceeds {max_states}")
        e = self.pa.E[np.ix_(self.q_of, self.q_of)]
        return e if player == 1 else e.T

    @cached_property
    def rank1(self) -> RankAssignment:
        return product_ranks(self, 1)

    @cached_property
    def rank2(self) -> RankAssignment:
        return product_ranks(self, 2)

    def ranks(self, player: int) -> RankAssignment:
        return self.rank1 if player == 1 else self.rank2

    def to_dict(self, with_ranks: bool = True) -> dict:
        d = super().to_dict()
        d["pairs"] = {self.states[v]: [self.game.states[s], q] for v, (s, q) in
                      enumerate(zip(self.s_of.tolist(), self.q_of.tolist()))}
        if with_ranks:
            d["rank1"] = {self.states[v]: int(r) for v, r in enumerate(self.rank1.ranks)}
            d["rank2"] = {self.states[v]: int(r) for v, r in enumerate(self.rank2.ranks)}
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_dot(self, max_states: int = 200) -> str:
        if self.n_states > max_states:
            raise ProductError(f"DOT export is limited to {max_states} states")
        lines = ["digraph product {"]
        for v in range(self.n_states):
            shape = "doublecircle" if v == self.init else "circle"
            lines.append(f'  {v} [label="{self.states[v]}\\nr1={self.rank1[v]}", shape={shape}];')
        for v in range(self.n_states):
            for a1 in range(self.n1):
                for a2 in range(self.n2):
                    for d, p in self.successors(v, a1, a2):
                        lines.append(f'  {v} -> {d} [label="{self.actions1[a1]},{self.actions2[a2]}:{p}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def letter_indices(g: ConcurrentGame, pa: PreferenceAutomaton) -> np.ndarray:
    """Automaton letter index of each game state's label (projected onto the automaton's AP)."""
    missing = set(pa.ap) - set(g.ap)
    if missing:
        raise ProductError(f"propositions {sorted(missing)} used by the preferences are not in the game AP")
    keep = set(pa.ap)
    return np.array([pa.letter_index(lab & keep) for lab in g.labels], dtype=np.int64)


def build_product(g: ConcurrentGame, pa: PreferenceAutomaton, max_states: int = 2_000_000,
                  inits=None) -> ProductGame:
    """Reachable product from ``(s0, delta(q0, L(s0)))``.

    ``inits`` lists several game start states to explore at once; ``h.inits``
    then gives their product states in the same order and ``h.init`` is the first.
    """
    lidx = letter_indices(g, pa)
    nq = pa.n_states
    n1n2 = g.n1 * g.n2
    counts = np.diff(g.ptr)
    starts = np.asarray([g.init] if inits is None else list(inits), dtype=np.int64)
    start_keys = starts * nq + pa.delta[pa.initial, lidx[starts]]
    ids = np.full(g.n_states * nq, -1, dtype=np.int64)
    uniq, first = np.unique(start_keys, return_index=True)
    frontier = uniq[np.argsort(first, kind="stable")]
    ids[frontier] = np.arange(len(frontier))
    order = [frontier]
    n = len(frontier)
    while len(frontier):
        s = frontier // nq
        q = frontier % nq
        rows = (s[:, None] * n1n2 + np.arange(n1n2)[None, :]).ravel()
        qrow = np.repeat(q, n1n2)
        lo, c = g.ptr[rows], counts[rows]
        ent = np.repeat(lo - np.cumsum(c) + c, c) + np.arange(c.sum())
        d = g.dst[ent]
        keys = d * nq + pa.delta[np.repeat(qrow, c), lidx[d]]
        keys = keys[ids[keys] < 0]
        if not len(keys):
            break
        uniq, first = np.unique(keys, return_index=True)
        new = uniq[np.argsort(first, kind="stable")]
        if n + len(new) > max_states:
            raise ProductError(f"product exceeds {max_states} states")
        ids[new] = np.arange(n, n + len(new))
        n += len(new)
        order.append(new)
        frontier = new
    keys = np.concatenate(order)
    s_of, q_of = keys // nq, keys % nq
    rows = (s_of[:, None] * n1n2 + np.arange(n1n2)[None, :]).ravel()
    c = counts[rows]
    ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(c, out=ptr[1:])
    ent = np.repeat(g.ptr[rows] - ptr[:-1], c) + np.arange(ptr[-1])
    d = g.dst[ent]
    qsrc = np.repeat(np.repeat(q_of, n1n2), c)
    dst = ids[d * nq + pa.delta[qsrc, lidx[d]]]
    names = [f"({g.states[s]},{q})" for s, q in zip(s_of.tolist(), q_of.tolist())]
    return ProductGame(
        states=names, actions1=list(g.actions1), actions2=list(g.actions2), ptr=ptr, dst=dst,
        pid=g.pid[ent].copy(), probs=list(g.probs), init=int(ids[start_keys[0]]), ap=tuple(g.ap),
        labels=[g.labels[s] for s in s_of.tolist()], game=g, pa=pa, s_of=s_of, q_of=q_of,
        inits=ids[start_keys],
    )


def trace_in_product(h: ProductGame, path: Sequence[int]) -> list:
    """Lift a game path to the product; raises if a step leaves the reachable product."""
    pa, g = h.pa, h.game
    index = h.pair_index
    keep = set(pa.ap)
    out = []
    q = pa.initial
    for s in path:
        q = int(pa.delta[q, pa.letter_index(g.labels[s] & keep)])
        try:
            out.append(index[(int(s), q)])
        except KeyError:
            raise ProductError(f"path visits ({g.states[s]},{q}) which is not a reachable product state") from None
    return out
