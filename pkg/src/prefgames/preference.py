"""Preference specifications over LTLf goals and preference automata.

A specification names formulas and relates them with atomic statements
(``>`` strict, ``>=`` weak, ``~`` indifferent).  The statements are closed into
a preorder on formula indices, which is then lifted to sets of satisfied
formulas and hence to states of the synchronous product of the formula DFAs.
"""
from __future__ import annotations

import enum
import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .ltlf import DEFAULT_MAX_AP, Dfa, Formula, LtlfSyntaxError, all_letters, letter_key, parse_ltlf, to_dfa

__all__ = [
    "Comparison", "PrefSpec", "Preorder", "PreferenceAutomaton", "PreferenceSpecError",
    "InconsistentPreferenceError", "parse_pref_spec", "close_preorder", "lift_compare",
    "weakly_dominates", "build_preference_automaton", "compare_words", "SEMANTICS",
]

SEMANTICS = ("forall-exists",)


class PreferenceSpecError(ValueError):
    pass


class InconsistentPreferenceError(PreferenceSpecError):
    def __init__(self, statement, cycle):
        i, op, j = statement
        path = " >= ".join(str(k) for k in cycle)
        super().__init__(f"strict statement {i} {op} {j} contradicts derived chain {path}")
        self.statement = statement
        self.cycle = cycle


class Comparison(enum.Enum):
    STRICTLY_GREATER = "strictly-greater"
    STRICTLY_LESS = "strictly-less"
    INDIFFERENT = "indifferent"
    INCOMPARABLE = "incomparable"

    @classmethod
    def from_weak(cls, ab: bool, ba: bool) -> "Comparison":
        if ab and ba:
            return cls.INDIFFERENT
        if ab:
            return cls.STRICTLY_GREATER
        if ba:
            return cls.STRICTLY_LESS
        return cls.INCOMPARABLE


@dataclass
class PrefSpec:
    names: list
    formulas: list
    statements: list
    semantics: str = "forall-exists"
    texts: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.formulas)

    def atoms(self) -> frozenset:
        out = frozenset()
        for f in self.formulas:
            out |= f.atoms()
        return out

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class Preorder:
    """Boolean matrix ``R`` with ``R[i, j]`` meaning i is weakly preferred to j."""

    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def weak(self, i: int, j: int) -> bool:
        return bool(self.matrix[i, j])

    def strict(self, i: int, j: int) -> bool:
        return bool(self.matrix[i, j] and not self.matrix[j, i])

    def compare(self, i: int, j: int) -> Comparison:
        return Comparison.from_weak(self.weak(i, j), self.weak(j, i))

    def is_preorder(self) -> bool:
        return is_preorder(self.matrix)

    def transpose(self) -> "Preorder":
        return Preorder(self.matrix.T.copy())


def is_preorder(m: np.ndarray) -> bool:
    m = np.asarray(m, dtype=bool)
    if not m.diagonal().all():
        return False
    composed = (m.astype(np.int64) @ m.astype(np.int64)) > 0
    return not (composed & ~m).any()


_FORMULA_RE = re.compile(r"^formula\s+([A-Za-z_]\w*)\s*:=\s*(.+)$")
_PREF_RE = re.compile(r"^pref\s+([A-Za-z_]\w*)\s*(>=|>|~)\s*([A-Za-z_]\w*)$")
_SEM_RE = re.compile(r"^semantics\s+(\S+)$")


def parse_pref_spec(text: str) -> PrefSpec:
    """Parse the line-oriented spec format::

        formula f1 := F d1 & G !o
        pref f1 > f2
        semantics forall-exists
    """
    if not text or not text.strip():
        raise PreferenceSpecError("empty preference specification")
    names, formulas, texts, pending = [], [], [], []
    semantics = "forall-exists"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _FORMULA_RE.match(line):
            name, body = m.group(1), m.group(2).strip()
            if name in names:
                raise PreferenceSpecError(f"line {lineno}: duplicate formula name {name!r}")
            try:
                formulas.append(parse_ltlf(body))
            except LtlfSyntaxError as e:
                raise PreferenceSpecError(f"line {lineno}: cannot parse formula {name!r}: {e}") from e
            names.append(name)
            texts.append(body)
        elif m := _PREF_RE.match(line):
            pending.append((lineno, m.group(1), m.group(2), m.group(3)))
        elif m := _SEM_RE.match(line):
            semantics = m.group(1)
            if semantics not in SEMANTICS:
                raise PreferenceSpecError(f"line {lineno}: unknown semantics {semantics!r}")
        else:
            raise PreferenceSpecError(f"line {lineno}: cannot parse {line!r}")
    if not formulas:
        raise PreferenceSpecError("no formulas declared")
    statements = []
    for lineno, lhs, op, rhs in pending:
        for name in (lhs, rhs):
            if name not in names:
                raise PreferenceSpecError(f"line {lineno}: unknown formula name {name!r}")
        statements.append((names.index(lhs), op, names.index(rhs)))
    return PrefSpec(names, formulas, statements, semantics, texts)


def close_preorder(statements: Iterable, n: int) -> Preorder:
    """Reflexive-transitive closure of the atomic statements, checked for
    consistency: no strict statement may be reversed by the closure."""
    statements = list(statements)
    base = np.eye(n, dtype=bool)
    for i, op, j in statements:
        if not (0 <= i < n and 0 <= j < n):
            raise PreferenceSpecError(f"statement ({i} {op} {j}) out of range for n={n}")
        if op in (">", ">="):
            base[i, j] = True
        elif op == "~":
            base[i, j] = base[j, i] = True
        else:
            raise PreferenceSpecError(f"unknown operator {op!r}")
    closure = base.copy()
    for k in range(n):
        closure |= closure[:, k:k + 1] & closure[k:k + 1, :]
    for i, op, j in statements:
        if op == ">" and closure[j, i]:
            raise InconsistentPreferenceError((i, op, j), _chain(base, j, i) + [j])
    return Preorder(closure)


def _chain(base: np.ndarray, src: int, dst: int) -> list:
    # shortest generating chain src >= ... >= dst
    parent = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        for v in np.flatnonzero(base[u]):
            v = int(v)
            if v not in parent:
                parent[v] = u
                queue.append(v)
    path, u = [], dst
    while u is not None:
        path.append(u)
        u = parent[u]
    return path[::-1]


def weakly_dominates(x: Iterable[int], y: Iterable[int], r: Preorder, semantics: str = "forall-exists") -> bool:
    if semantics != "forall-exists":
        raise PreferenceSpecError(f"unknown semantics {semantics!r}")
    x = list(x)
    return all(any(r.matrix[i, j] for i in x) for j in y)


def lift_compare(x: Iterable[int], y: Iterable[int], r: Preorder, semantics: str = "forall-exists") -> Comparison:
    """Compare two sets of satisfied formula indices.

    Under ``forall-exists``, X is weakly preferred to Y when every formula in Y
    is weakly dominated by some formula in X; the empty set is dominated by
    everything.
    """
    x, y = frozenset(x), frozenset(y)
    return Comparison.from_weak(weakly_dominates(x, y, r, semantics), weakly_dominates(y, x, r, semantics))


@dataclass
class PreferenceAutomaton:
    """Semi-automaton over ``2^ap`` whose states carry a preorder ``E``.

    States are tuples of component DFA states.  ``E`` is stored per
    satisfaction class: ``E[q, q'] == class_E[cls[q], cls[q']]``.
    """

    ap: tuple
    letters: tuple
    components: list
    states: list
    delta: np.ndarray
    initial: int
    sat: list
    classes: list
    cls: np.ndarray
    class_E: np.ndarray
    names: list = field(default_factory=list)
    semantics: str = "forall-exists"

    @property
    def n_states(self) -> int:
        return len(self.states)

    @cached_property
    def _letter_index(self) -> dict:
        return {letter: i for i, letter in enumerate(self.letters)}

    @cached_property
    def E(self) -> np.ndarray:
        return self.class_E[np.ix_(self.cls, self.cls)]

    def letter_index(self, letter: Iterable[str]) -> int:
        letter = frozenset(letter)
        try:
            return self._letter_index[letter]
        except KeyError:
            raise ValueError(f"letter {sorted(letter)} is not over AP {list(self.ap)}") from None

    def step(self, q: int, letter) -> int:
        return int(self.delta[q, self.letter_index(letter)])

    def run(self, word: Sequence) -> int:
        q = self.initial
        for letter in word:
            q = self.step(q, letter)
        return q

    def weak(self, q: int, q2: int) -> bool:
        return bool(self.class_E[self.cls[q], self.cls[q2]])

    def compare_states(self, q: int, q2: int) -> Comparison:
        return Comparison.from_weak(self.weak(q, q2), self.weak(q2, q))

    def compare_words(self, w: Sequence, w2: Sequence) -> Comparison:
        if len(w) == 0 or len(w2) == 0:
            raise ValueError("words must be nonempty")
        return self.compare_states(self.run(w), self.run(w2))

    def to_json(self) -> dict:
        return {
            "ap": list(self.ap),
            "formulas": list(self.names),
            "semantics": self.semantics,
            "initial": self.initial,
            "states": [
                {"id": q, "components": list(map(int, t)), "sat": sorted(self.names[i] for i in self.sat[q])}
                for q, t in enumerate(self.states)
            ],
            "transitions": [
                [q, list(letter_key(self.letters[i])), int(self.delta[q, i])]
                for q in range(self.n_states) for i in range(len(self.letters))
            ],
            "E": [[int(a), int(b)] for a, b in zip(*np.nonzero(self.E))],
        }

    def to_dot(self) -> str:
        reps = {}
        for q in range(self.n_states):
            reps.setdefault(int(self.cls[q]), q)
        lines = ["digraph preference {", "  rankdir=TB;"]
        for c, q in sorted(reps.items()):
            label = "{" + ",".join(self.names[i] for i in sorted(self.classes[c])) + "}"
            lines.append(f'  {q} [label="{q}: {label}"];')
        for c1, q1 in sorted(reps.items()):
            for c2, q2 in sorted(reps.items()):
                if c1 != c2 and self.class_E[c1, c2] and not self.class_E[c2, c1]:
                    lines.append(f"  {q1} -> {q2};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_preference_automaton(spec: PrefSpec, ap: Iterable[str] | None = None, max_states: int = 100_000,
                               max_ap: int = DEFAULT_MAX_AP) -> PreferenceAutomaton:
    ap = tuple(sorted(set(ap) if ap is not None else spec.atoms()))
    missing = spec.atoms() - set(ap)
    if missing:
        raise PreferenceSpecError(f"formula atoms {sorted(missing)} are not in AP {list(ap)}")
    r = close_preorder(spec.statements, spec.n)
    dfas = [to_dfa(f, ap, max_ap=max_ap) for f in spec.formulas]
    letters = all_letters(ap)
    start = tuple(d.initial for d in dfas)
    ids = {start: 0}
    states = [start]
    rows = []
    queue = deque([start])
    while queue:
        t = queue.popleft()
        row = []
        for li in range(len(letters)):
            succ = tuple(d.delta[q][li] for d, q in zip(dfas, t))
            if succ not in ids:
                if len(ids) >= max_states:
                    raise PreferenceSpecError(f"preference automaton exceeds {max_states} states")
                ids[succ] = len(states)
                states.append(succ)
                queue.append(succ)
            row.append(ids[succ])
        rows.append(row)
    sat = [frozenset(i for i, (d, q) in enumerate(zip(dfas, t)) if q in d.accepting) for t in states]
    classes = sorted(set(sat), key=lambda s: (len(s), sorted(s)))
    class_id = {c: k for k, c in enumerate(classes)}
    cls = np.array([class_id[s] for s in sat], dtype=np.int64)
    m = len(classes)
    class_E = np.zeros((m, m), dtype=bool)
    for a in range(m):
        for b in range(m):
            class_E[a, b] = weakly_dominates(classes[a], classes[b], r, spec.semantics)
    if not is_preorder(class_E):
        raise PreferenceSpecError("lifted relation is not a preorder")
    return PreferenceAutomaton(
        ap=ap, letters=letters, components=dfas, states=states,
        delta=np.array(rows, dtype=np.int64).reshape(len(states), len(letters)),
        initial=0, sat=sat, classes=classes, cls=cls, class_E=class_E,
        names=list(spec.names), semantics=spec.semantics,
    )


def compare_words(pa: PreferenceAutomaton, w: Sequence, w2: Sequence) -> Comparison:
    return pa.compare_words(w, w2)


def load_pref_spec(path) -> PrefSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_pref_spec(fh.read())


def dumps_automaton(pa: PreferenceAutomaton) -> str:
    return json.dumps(pa.to_json(), sort_keys=True)
