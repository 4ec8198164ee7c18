"""Maximal elements of preorders and the layered rank metric.

Rank 0 holds the maximal elements; rank k+1 the maximal elements of what is
left after removing ranks 0..k.  "Maximal" means no element in the set is
strictly preferred, i.e. the usual reading that keeps the peeling well-defined
for reflexive relations.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .preference import is_preorder

__all__ = [
    "RankAssignment", "NotAPreorderError", "max_elements", "min_elements", "compute_ranks",
    "peel_ranks", "product_ranks", "rank_table_csv",
]


class NotAPreorderError(ValueError):
    pass


def _strict(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=bool)
    return r & ~r.T


def max_elements(u: Iterable[int], r: np.ndarray) -> set:
    """Elements of ``u`` with no strictly preferred element in ``u``."""
    u = sorted(set(u))
    if not u:
        raise ValueError("max_elements of an empty set")
    s = _strict(r)[np.ix_(u, u)]
    return {x for k, x in enumerate(u) if not s[:, k].any()}


def min_elements(u: Iterable[int], r: np.ndarray) -> set:
    return max_elements(u, np.asarray(r, dtype=bool).T)


@dataclass(frozen=True)
class RankAssignment:
    """``ranks[v]`` per node.  ``top`` overrides ``kmax`` when the ranks were
    projected from a larger ranked set (product states from automaton states)."""

    ranks: np.ndarray
    top: int | None = None

    @property
    def kmax(self) -> int:
        if self.top is not None:
            return self.top
        return int(self.ranks.max()) if len(self.ranks) else 0

    @property
    def layers(self) -> list:
        return [set(np.flatnonzero(self.ranks == k).tolist()) for k in range(self.kmax + 1)]

    def __getitem__(self, v: int) -> int:
        return int(self.ranks[v])

    def __len__(self) -> int:
        return len(self.ranks)


def compute_ranks(r: np.ndarray, check: bool = True) -> RankAssignment:
    """Rank of each node: length of the longest strict chain above it.

    For a preorder, ``y > x`` implies the strict up-set of ``y`` is a proper
    subset of that of ``x``, so sorting by up-set size is a topological order.
    """
    r = np.asarray(r, dtype=bool)
    if check and not is_preorder(r):
        raise NotAPreorderError("relation is not reflexive and transitive")
    s = _strict(r)
    n = r.shape[0]
    ranks = np.zeros(n, dtype=np.int64)
    for x in np.argsort(s.sum(axis=0), kind="stable"):
        above = np.flatnonzero(s[:, x])
        if len(above):
            ranks[x] = ranks[above].max() + 1
    return RankAssignment(ranks)


def peel_ranks(r: np.ndarray) -> RankAssignment:
    """Literal layer peeling: repeatedly remove the maximal elements."""
    r = np.asarray(r, dtype=bool)
    if not is_preorder(r):
        raise NotAPreorderError("relation is not reflexive and transitive")
    remaining = set(range(r.shape[0]))
    ranks = np.zeros(r.shape[0], dtype=np.int64)
    k = 0
    while remaining:
        layer = max_elements(remaining, r)
        for x in layer:
            ranks[x] = k
        remaining -= layer
        k += 1
    return RankAssignment(ranks)


def product_ranks(h, player: int = 1) -> RankAssignment:
    """Ranks of product states, computed on the preference automaton and
    projected through each state's automaton component."""
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    E = h.pa.E
    q_ranks = compute_ranks(E if player == 1 else E.T)
    return RankAssignment(q_ranks.ranks[h.q_of], top=q_ranks.kmax)


def rank_table_csv(names: list, rank1: RankAssignment, rank2: RankAssignment) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "rank1", "rank2"])
    for i, name in enumerate(names):
        w.writerow([name, rank1[i], rank2[i]])
    return buf.getvalue()
