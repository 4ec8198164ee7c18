"""Concurrent stochastic two-player games, memoryless strategies and rollouts.

Transitions are stored row-wise in CSR form: row ``(s * n1 + a1) * n2 + a2``
lists the positive-probability successors of ``s`` under the joint action
``(a1, a2)``.  Probabilities are exact :class:`fractions.Fraction` values kept
in a shared table and referenced by index, which keeps large grid games small.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ConcurrentGame", "Strategy", "GameFormatError", "parse_probability", "validate_game",
    "game_from_dict", "load_game", "is_consistent", "sample_path", "trace", "STOPPED", "HORIZON",
]

STOPPED = "strategy-stopped"
HORIZON = "horizon-cut"


class GameFormatError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations[:5]) + (" ..." if len(self.violations) > 5 else ""))


def parse_probability(value) -> Fraction:
    """Accept ``"4/5"``, ``"0.8"``, ints and floats (floats via their repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"not a probability: {value!r}")
    if isinstance(value, float):
        value = repr(value)
    return Fraction(value)


@dataclass(eq=False)
class ConcurrentGame:
    states: list
    actions1: list
    actions2: list
    ptr: np.ndarray
    dst: np.ndarray
    pid: np.ndarray
    probs: list
    init: int
    ap: tuple = ()
    labels: list = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n1(self) -> int:
        return len(self.actions1)

    @property
    def n2(self) -> int:
        return len(self.actions2)

    def actions(self, player: int) -> list:
        return self.actions1 if player == 1 else self.actions2

    def row(self, s: int, a1: int, a2: int) -> int:
        return (s * self.n1 + a1) * self.n2 + a2

    def successors(self, s: int, a1: int, a2: int) -> list:
        r = self.row(s, a1, a2)
        lo, hi = self.ptr[r], self.ptr[r + 1]
        return [(int(d), self.probs[p]) for d, p in zip(self.dst[lo:hi], self.pid[lo:hi])]

    def succ_states(self, s: int, a1: int, a2: int) -> np.ndarray:
        r = self.row(s, a1, a2)
        return self.dst[self.ptr[r]:self.ptr[r + 1]]

    @cached_property
    def row_src(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_states), self.n1 * self.n2)

    @cached_property
    def entry_row(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.ptr) - 1), np.diff(self.ptr))

    @cached_property
    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])[self.pid] if len(self.pid) else np.zeros(0)

    @cached_property
    def index(self) -> dict:
        return {name: i for i, name in enumerate(self.states)}

    def label(self, s: int) -> frozenset:
        return self.labels[s]

    def to_dict(self) -> dict:
        transitions = []
        for s in range(self.n_states):
            for a1 in range(self.n1):
                for a2 in range(self.n2):
                    dist = {self.states[d]: str(p) for d, p in self.successors(s, a1, a2)}
                    transitions.append({"s": self.states[s], "a1": self.actions1[a1],
                                        "a2": self.actions2[a2], "dist": dist})
        return {
            "states": list(self.states),
            "ap": list(self.ap),
            "labels": {self.states[s]: sorted(self.labels[s]) for s in range(self.n_states)},
            "actions1": list(self.actions1),
            "actions2": list(self.actions2),
            "init": self.states[self.init],
            "transitions": transitions,
        }

    @classmethod
    def from_rows(cls, states, actions1, actions2, rows: Sequence[Mapping[int, Fraction]], init: int,
                  ap=(), labels=None) -> "ConcurrentGame":
        """Build from a list of ``{dst: prob}`` dicts in row order."""
        table: dict = {}
        probs: list = []
        ptr = [0]
        dst, pid = [], []
        for dist in rows:
            for d in sorted(dist):
                p = dist[d]
                if p == 0:
                    continue
                if p not in table:
                    table[p] = len(probs)
                    probs.append(p)
                dst.append(d)
                pid.append(table[p])
            ptr.append(len(dst))
        return cls(list(states), list(actions1), list(actions2), np.array(ptr, dtype=np.int64),
                   np.array(dst, dtype=np.int64), np.array(pid, dtype=np.int64), probs, init,
                   tuple(ap), list(labels) if labels is not None else [frozenset()] * len(states))


def _validate_dict(d: Mapping) -> list:
    out = []
    for key in ("states", "ap", "labels", "actions1", "actions2", "init", "transitions"):
        if key not in d:
            out.append(f"missing field {key!r}")
    if out:
        return out
    states = list(d["states"])
    known = set(states)
    if len(known) != len(states):
        out.append("duplicate state names")
    ap = set(d["ap"])
    if d["init"] not in known:
        out.append(f"initial state {d['init']!r} is not declared")
    for s, props in d["labels"].items():
        if s not in known:
            out.append(f"label for undeclared state {s!r}")
        for p in props:
            if p not in ap:
                out.append(f"state {s!r} labelled with undeclared proposition {p!r}")
    for s in states:
        if s not in d["labels"]:
            out.append(f"state {s!r} has no label entry")
    a1s, a2s = set(d["actions1"]), set(d["actions2"])
    if not a1s or not a2s:
        out.append("both players need at least one action")
    seen = set()
    for t in d["transitions"]:
        s, a1, a2 = t.get("s"), t.get("a1"), t.get("a2")
        where = f"({s}, {a1}, {a2})"
        if s not in known:
            out.append(f"transition {where}: undeclared state {s!r}")
        if a1 not in a1s:
            out.append(f"transition {where}: undeclared P1 action {a1!r}")
        if a2 not in a2s:
            out.append(f"transition {where}: undeclared P2 action {a2!r}")
        if (s, a1, a2) in seen:
            out.append(f"transition {where}: defined twice")
        seen.add((s, a1, a2))
        total = Fraction(0)
        for target, p in t.get("dist", {}).items():
            if target not in known:
                out.append(f"transition {where}: successor {target!r} is not a declared state")
            try:
                p = parse_probability(p)
            except (ValueError, ZeroDivisionError, TypeError):
                out.append(f"transition {where}: bad probability {p!r}")
                continue
            if p < 0:
                out.append(f"transition {where}: negative probability {p}")
            total += p
        if total != 1:
            out.append(f"transition {where}: probabilities sum to {float(total):g}, not 1")
    for s in states:
        for a1 in d["actions1"]:
            for a2 in d["actions2"]:
                if (s, a1, a2) not in seen:
                    out.append(f"transition ({s}, {a1}, {a2}) is missing")
    return out


def _validate_game(g: ConcurrentGame) -> list:
    out = []
    n_rows = g.n_states * g.n1 * g.n2
    if len(g.ptr) != n_rows + 1:
        return [f"transition table has {len(g.ptr) - 1} rows, expected {n_rows}"]
    if not 0 <= g.init < g.n_states:
        out.append(f"initial state {g.init} out of range")
    if len(g.labels) != g.n_states:
        out.append("labelling is not total")
    for s, lab in enumerate(g.labels):
        extra = set(lab) - set(g.ap)
        if extra:
            out.append(f"state {g.states[s]!r} labelled with undeclared propositions {sorted(extra)}")
    if len(g.dst) and (g.dst.min() < 0 or g.dst.max() >= g.n_states):
        out.append("successor index out of range")
    for s in range(g.n_states):
        for a1 in range(g.n1):
            for a2 in range(g.n2):
                total = sum((p for _, p in g.successors(s, a1, a2)), Fraction(0))
                if total != 1:
                    out.append(f"transition ({g.states[s]}, {g.actions1[a1]}, {g.actions2[a2]}): "
                               f"probabilities sum to {float(total):g}, not 1")
    return out


def validate_game(g) -> list:
    """List of invariant violations; empty when the game is well formed.

    Accepts a :class:`ConcurrentGame` or a dict in the JSON game schema.
    """
    if isinstance(g, ConcurrentGame):
        return _validate_game(g)
    return _validate_dict(g)


def game_from_dict(d: Mapping) -> ConcurrentGame:
    violations = _validate_dict(d)
    if violations:
        raise GameFormatError(violations)
    states = list(d["states"])
    idx = {s: i for i, s in enumerate(states)}
    a1i = {a: i for i, a in enumerate(d["actions1"])}
    a2i = {a: i for i, a in enumerate(d["actions2"])}
    n1, n2 = len(a1i), len(a2i)
    rows: list = [None] * (len(states) * n1 * n2)
    for t in d["transitions"]:
        r = (idx[t["s"]] * n1 + a1i[t["a1"]]) * n2 + a2i[t["a2"]]
        rows[r] = {idx[k]: parse_probability(v) for k, v in t["dist"].items()}
    labels = [frozenset(d["labels"][s]) for s in states]
    return ConcurrentGame.from_rows(states, d["actions1"], d["actions2"], rows, idx[d["init"]],
                                    tuple(d["ap"]), labels)


def load_game(path) -> ConcurrentGame:
    with open(path, encoding="utf-8") as fh:
        return game_from_dict(json.load(fh))


@dataclass
class Strategy:
    """Memoryless randomized strategy of one player.

    ``table`` maps a state to ``{action index: probability}``.  A missing
    state means "stop" for P1.  For P2 a missing state means no commitment,
    read as uniform play over all of P2's actions.
    """

    player: int
    table: dict = field(default_factory=dict)

    def defined(self, s: int) -> bool:
        return s in self.table

    def support(self, s: int):
        dist = self.table.get(s)
        if dist is None:
            return None
        return tuple(a for a in sorted(dist) if dist[a] > 0)

    def dist(self, s: int):
        return self.table.get(s)

    @classmethod
    def uniform(cls, player: int, supports: Mapping) -> "Strategy":
        table = {}
        for s, sup in supports.items():
            sup = sorted(set(int(a) for a in sup))
            if not sup:
                raise ValueError(f"empty support at state {s}")
            table[int(s)] = {a: Fraction(1, len(sup)) for a in sup}
        return cls(player, table)

    def check(self) -> list:
        out = []
        for s, dist in self.table.items():
            if not any(p > 0 for p in dist.values()):
                out.append(f"state {s}: empty support")
            if sum(dist.values(), Fraction(0)) != 1:
                out.append(f"state {s}: distribution does not sum to 1")
        return out

    def to_json(self, g: ConcurrentGame) -> dict:
        acts = g.actions(self.player)
        entries = []
        for s in sorted(self.table):
            sup = self.support(s)
            entries.append({"state": g.states[s], "support": [acts[a] for a in sup],
                            "dist": [str(self.table[s][a]) for a in sup]})
        return {"player": self.player, "entries": entries}

    @classmethod
    def from_json(cls, data: Mapping, g: ConcurrentGame) -> "Strategy":
        player = int(data["player"])
        acts = {a: i for i, a in enumerate(g.actions(player))}
        table = {}
        for e in data["entries"]:
            if e["state"] not in g.index:
                raise ValueError(f"strategy entry for unknown state {e['state']!r}")
            probs = e.get("dist") or [Fraction(1, len(e["support"]))] * len(e["support"])
            table[g.index[e["state"]]] = {acts[a]: parse_probability(p) for a, p in zip(e["support"], probs)}
        strat = cls(player, table)
        problems = strat.check()
        if problems:
            raise ValueError("; ".join(problems))
        return strat


def _p2_support(g: ConcurrentGame, pi2: Strategy, s: int) -> tuple:
    sup = pi2.support(s) if pi2 is not None else None
    return tuple(range(g.n2)) if sup is None else sup


def trace(g: ConcurrentGame, path: Sequence[int]) -> list:
    return [g.labels[s] for s in path]


def is_consistent(path: Sequence[int], pi1: Strategy, pi2: Strategy, g: ConcurrentGame) -> bool:
    """True iff every step of ``path`` is possible under the profile's supports."""
    if len(path) == 0:
        return False
    for s, nxt in zip(path, path[1:]):
        sup1 = pi1.support(s)
        if sup1 is None:
            return False
        if not any(nxt in g.succ_states(s, a1, a2) for a1 in sup1 for a2 in _p2_support(g, pi2, s)):
            return False
    return True


def _draw(rng: random.Random, items: Sequence, weights: Sequence[float]):
    x = rng.random() * sum(weights)
    acc = 0.0
    for item, w in zip(items, weights):
        acc += w
        if x < acc:
            return item
    return items[-1]


def sample_path(g: ConcurrentGame, pi1: Strategy, pi2: Strategy, seed: int = 0, max_steps: int = 1000):
    """Seeded rollout.  Stops when P1's strategy is undefined or after
    ``max_steps`` transitions; returns ``(path, reason)``."""
    rng = random.Random(seed)
    s = g.init
    path = [s]
    fprobs = [float(p) for p in g.probs]
    for _ in range(max_steps):
        d1 = pi1.dist(s)
        if d1 is None:
            return path, STOPPED
        a1 = _draw(rng, sorted(d1), [float(d1[a]) for a in sorted(d1)])
        d2 = pi2.dist(s) if pi2 is not None else None
        if d2 is None:
            a2 = rng.randrange(g.n2)
        else:
            a2 = _draw(rng, sorted(d2), [float(d2[a]) for a in sorted(d2)])
        r = g.row(s, a1, a2)
        lo, hi = g.ptr[r], g.ptr[r + 1]
        s = int(_draw(rng, g.dst[lo:hi].tolist(), [fprobs[p] for p in g.pid[lo:hi]]))
        path.append(s)
    if pi1.dist(s) is None:
        return path, STOPPED
    return path, HORIZON
