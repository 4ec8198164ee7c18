"""LTLf formulas over finite, nonempty traces and their compilation to DFAs.

Formulas are immutable trees.  ``to_dfa`` builds an automaton by formula
progression: a state is a pair ``(obligation, accepted)`` where the obligation
is what the remainder of the trace must satisfy and ``accepted`` records
whether the prefix read so far already satisfies the source formula.
"""
from __future__ import annotations

import itertools
import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "Formula", "Dfa", "LtlfSyntaxError", "UndeclaredAtomError", "AlphabetTooLargeError",
    "TRUE", "FALSE", "atom", "neg", "conj", "disj", "nxt", "until", "eventually", "always",
    "parse_ltlf", "eval_word", "progress", "last_value", "simplify", "to_dfa", "minimize",
    "all_letters", "letter_key", "DEFAULT_MAX_AP",
]

DEFAULT_MAX_AP = 12


class LtlfSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UndeclaredAtomError(ValueError):
    pass


class AlphabetTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Formula:
    """LTLf abstract syntax node.

    ``op`` is one of ``true false atom not and or next until eventually always``.
    ``and``/``or`` nodes may carry more than two arguments after simplification.
    """

    op: str
    args: tuple = ()
    name: str | None = None

    @cached_property
    def key(self) -> str:
        if self.op == "atom":
            return self.name
        if self.op in ("true", "false"):
            return self.op
        if self.op == "not":
            return "!" + self.args[0].key
        if self.op in ("and", "or"):
            sep = " & " if self.op == "and" else " | "
            return "(" + sep.join(a.key for a in self.args) + ")"
        if self.op == "until":
            return f"({self.args[0].key} U {self.args[1].key})"
        prefix = {"next": "X", "eventually": "F", "always": "G"}[self.op]
        return f"{prefix}({self.args[0].key})"

    def __eq__(self, other):
        return isinstance(other, Formula) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return self.key

    def __repr__(self):
        return f"Formula({self.key!r})"

    def atoms(self) -> frozenset:
        if self.op == "atom":
            return frozenset([self.name])
        out = frozenset()
        for a in self.args:
            out |= a.atoms()
        return out

    def depth(self) -> int:
        return 1 + max((a.depth() for a in self.args), default=0)


TRUE = Formula("true")
FALSE = Formula("false")


def atom(name: str) -> Formula:
    return Formula("atom", (), name)


def neg(f: Formula) -> Formula:
    return Formula("not", (f,))


def conj(*fs: Formula) -> Formula:
    return Formula("and", tuple(fs))


def disj(*fs: Formula) -> Formula:
    return Formula("or", tuple(fs))


def nxt(f: Formula) -> Formula:
    return Formula("next", (f,))


def until(f: Formula, g: Formula) -> Formula:
    return Formula("until", (f, g))


def eventually(f: Formula) -> Formula:
    return Formula("eventually", (f,))


def always(f: Formula) -> Formula:
    return Formula("always", (f,))


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[!&|()]))")
_KEYWORDS = {"true", "false", "X", "U", "F", "G"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m:
            stripped = len(text) - len(text[pos:].lstrip())
            raise LtlfSyntaxError(f"unexpected character {text[stripped]!r}", stripped)
        start = m.start("ident") if m.group("ident") else m.start("sym")
        tokens.append((m.group("ident") or m.group("sym"), start))
        pos = m.end()
    tokens.append(("<eof>", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, ap):
        self.tokens = _tokenize(text)
        self.i = 0
        self.ap = None if ap is None else set(ap)

    def peek(self):
        return self.tokens[self.i][0]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, what: str):
        tok, pos = self.tokens[self.i]
        where = "end-of-input" if tok == "<eof>" else repr(tok)
        raise LtlfSyntaxError(f"{what}, found {where}", pos)

    def parse(self) -> Formula:
        f = self.or_expr()
        if self.peek() != "<eof>":
            self.fail("expected end of formula")
        return f

    def or_expr(self):
        f = self.and_expr()
        while self.peek() == "|":
            self.take()
            f = disj(f, self.and_expr())
        return f

    def and_expr(self):
        f = self.until_expr()
        while self.peek() == "&":
            self.take()
            f = conj(f, self.until_expr())
        return f

    def until_expr(self):
        f = self.unary()
        if self.peek() == "U":
            self.take()
            return until(f, self.until_expr())
        return f

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return neg(self.unary())
        if tok in ("X", "F", "G"):
            self.take()
            sub = self.unary()
            return {"X": nxt, "F": eventually, "G": always}[tok](sub)
        return self.primary()

    def primary(self):
        tok, pos = self.tokens[self.i]
        if tok == "(":
            self.take()
            f = self.or_expr()
            if self.peek() != ")":
                self.fail("expected ')'")
            self.take()
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok != "<eof>" and tok not in _KEYWORDS and re.fullmatch(r"[A-Za-z_]\w*", tok):
            self.take()
            if self.ap is not None and tok not in self.ap:
                raise UndeclaredAtomError(f"atom {tok!r} at position {pos} is not in AP {sorted(self.ap)}")
            return atom(tok)
        self.fail("expected a proposition, constant, unary operator or '('")


def parse_ltlf(text: str, ap: Iterable[str] | None = None) -> Formula:
    """Parse ``text`` into a formula.

    Precedence from tightest: unary (``! X F G``), ``U`` (right associative),
    ``&``, ``|``.  When ``ap`` is given every atom must belong to it.
    """
    if not text or not text.strip():
        raise LtlfSyntaxError("empty formula", 0)
    return _Parser(text, ap).parse()


# ---------------------------------------------------------------- semantics

def eval_word(f: Formula, word: Sequence[Iterable[str]]) -> bool:
    """Reference finite-trace semantics, by recursion on formula and position."""
    if len(word) == 0:
        raise ValueError("LTLf traces must be nonempty")
    w = [frozenset(a) for a in word]
    n = len(w)
    memo: dict = {}

    def sat(g: Formula, i: int) -> bool:
        k = (id(g), i)
        if k in memo:
            return memo[k]
        op = g.op
        if op == "true":
            r = True
        elif op == "false":
            r = False
        elif op == "atom":
            r = g.name in w[i]
        elif op == "not":
            r = not sat(g.args[0], i)
        elif op == "and":
            r = all(sat(a, i) for a in g.args)
        elif op == "or":
            r = any(sat(a, i) for a in g.args)
        elif op == "next":
            r = i + 1 < n and sat(g.args[0], i + 1)
        elif op == "until":
            r = False
            for j in range(i, n):
                if sat(g.args[1], j):
                    r = True
                    break
                if not sat(g.args[0], j):
                    break
        elif op == "eventually":
            r = any(sat(g.args[0], j) for j in range(i, n))
        elif op == "always":
            r = all(sat(g.args[0], j) for j in range(i, n))
        else:
            raise ValueError(f"unknown operator {op!r}")
        memo[k] = r
        return r

    return sat(f, 0)


def simplify(f: Formula) -> Formula:
    """Boolean normal form: flattened, sorted, deduplicated and/or lists,
    constant folding, double-negation elimination and ``x & !x`` detection."""
    op = f.op
    if op in ("true", "false", "atom"):
        return f
    if op == "not":
        g = simplify(f.args[0])
        if g.op == "true":
            return FALSE
        if g.op == "false":
            return TRUE
        if g.op == "not":
            return g.args[0]
        return neg(g)
    if op in ("and", "or"):
        unit, zero = (TRUE, FALSE) if op == "and" else (FALSE, TRUE)
        items = {}
        for a in f.args:
            a = simplify(a)
            subs = a.args if a.op == op else (a,)
            for s in subs:
                if s == zero:
                    return zero
                if s != unit:
                    items[s.key] = s
        for k, s in items.items():
            if s.op == "not" and s.args[0].key in items:
                return zero
        if not items:
            return unit
        if len(items) == 1:
            return next(iter(items.values()))
        return Formula(op, tuple(items[k] for k in sorted(items)))
    if op == "next":
        g = simplify(f.args[0])
        if g.op == "false":
            return FALSE
        return nxt(g)
    if op == "until":
        a, b = simplify(f.args[0]), simplify(f.args[1])
        if b.op in ("true", "false"):
            return b
        if a.op == "false":
            return b
        if a.op == "true":
            return eventually(b)
        return until(a, b)
    if op == "eventually":
        g = simplify(f.args[0])
        if g.op in ("true", "false"):
            return g
        return eventually(g)
    if op == "always":
        g = simplify(f.args[0])
        if g.op in ("true", "false"):
            return g
        return always(g)
    raise ValueError(f"unknown operator {op!r}")


def progress(f: Formula, letter: frozenset) -> Formula:
    """Obligation left for a nonempty continuation after reading ``letter``."""
    return simplify(_prog(f, letter))


def _prog(f: Formula, a: frozenset) -> Formula:
    op = f.op
    if op in ("true", "false"):
        return f
    if op == "atom":
        return TRUE if f.name in a else FALSE
    if op == "not":
        return neg(_prog(f.args[0], a))
    if op in ("and", "or"):
        return Formula(op, tuple(_prog(g, a) for g in f.args))
    if op == "next":
        return f.args[0]
    if op == "until":
        return disj(_prog(f.args[1], a), conj(_prog(f.args[0], a), f))
    if op == "eventually":
        return disj(_prog(f.args[0], a), f)
    if op == "always":
        return conj(_prog(f.args[0], a), f)
    raise ValueError(f"unknown operator {op!r}")


def last_value(f: Formula, a: frozenset) -> bool:
    """Truth of ``f`` on the one-letter trace ``[a]``."""
    op = f.op
    if op == "true":
        return True
    if op == "false":
        return False
    if op == "atom":
        return f.name in a
    if op == "not":
        return not last_value(f.args[0], a)
    if op == "and":
        return all(last_value(g, a) for g in f.args)
    if op == "or":
        return any(last_value(g, a) for g in f.args)
    if op == "next":
        return False
    if op == "until":
        return last_value(f.args[1], a)
    if op in ("eventually", "always"):
        return last_value(f.args[0], a)
    raise ValueError(f"unknown operator {op!r}")


# ---------------------------------------------------------------- automata

def letter_key(letter: Iterable[str]) -> tuple:
    return tuple(sorted(letter))


def all_letters(ap: Iterable[str]) -> tuple:
    """Every subset of ``ap``, ordered by their sorted proposition tuples."""
    props = sorted(set(ap))
    subsets = [frozenset(c) for r in range(len(props) + 1) for c in itertools.combinations(props, r)]
    return tuple(sorted(subsets, key=letter_key))


@dataclass(frozen=True)
class Dfa:
    """Total deterministic automaton over the letters ``2^ap``.

    ``delta[q][i]`` is the successor of ``q`` on ``letters[i]``.
    """

    ap: tuple
    delta: tuple
    initial: int
    accepting: frozenset
    letters: tuple = field(default=None)

    def __post_init__(self):
        if self.letters is None:
            object.__setattr__(self, "letters", all_letters(self.ap))

    @cached_property
    def _index(self) -> dict:
        return {letter: i for i, letter in enumerate(self.letters)}

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def letter_index(self, letter: Iterable[str]) -> int:
        letter = frozenset(letter)
        try:
            return self._index[letter]
        except KeyError:
            raise ValueError(f"letter {sorted(letter)} is not over AP {list(self.ap)}") from None

    def step(self, q: int, letter: Iterable[str]) -> int:
        return self.delta[q][self.letter_index(letter)]

    def run(self, word: Sequence[Iterable[str]]) -> int:
        q = self.initial
        for letter in word:
            q = self.step(q, letter)
        return q

    def accepts(self, word: Sequence[Iterable[str]]) -> bool:
        return self.run(word) in self.accepting

    def to_json(self) -> dict:
        transitions = []
        for q, row in enumerate(self.delta):
            for i, dst in enumerate(row):
                transitions.append([q, list(letter_key(self.letters[i])), dst])
        return {
            "ap": list(self.ap),
            "n_states": self.n_states,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "transitions": transitions,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Dfa":
        ap = tuple(data["ap"])
        letters = all_letters(ap)
        index = {letter: i for i, letter in enumerate(letters)}
        rows = [[None] * len(letters) for _ in range(data["n_states"])]
        for src, props, dst in data["transitions"]:
            rows[src][index[frozenset(props)]] = dst
        if any(d is None for row in rows for d in row):
            raise ValueError("DFA JSON is not total")
        return cls(ap, tuple(tuple(r) for r in rows), data["initial"], frozenset(data["accepting"]), letters)

    def to_dot(self, name: str = "dfa") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;", '  __start [shape=point];']
        for q in range(self.n_states):
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f"  {q} [shape={shape}];")
        lines.append(f"  __start -> {self.initial};")
        for q, row in enumerate(self.delta):
            grouped: dict = {}
            for i, dst in enumerate(row):
                grouped.setdefault(dst, []).append("{" + ",".join(letter_key(self.letters[i])) + "}")
            for dst in sorted(grouped):
                lines.append(f'  {q} -> {dst} [label="{" ".join(grouped[dst])}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class _Bdd:
    """Reduced ordered BDD over the elementary subformulas of one formula.

    Obligations are Boolean functions of atoms and temporal subformulas, so
    identifying them by their BDD node bounds the progression state space.
    """

    def __init__(self, root: Formula):
        elems = set()

        def collect(g):
            if g.op in ("atom", "next", "until", "eventually", "always"):
                elems.add(g)
            for a in g.args:
                collect(a)

        collect(root)
        self.vars = sorted(elems, key=lambda g: (g.depth(), g.key))
        self.index = {g: i for i, g in enumerate(self.vars)}
        self.nodes = [(len(self.vars), 0, 0), (len(self.vars), 1, 1)]
        self.unique: dict = {}
        self.ite_memo: dict = {}
        self.build_memo: dict = {}
        self.prog_memo: dict = {}
        self.var_prog_memo: dict = {}

    def mk(self, v, lo, hi):
        if lo == hi:
            return lo
        key = (v, lo, hi)
        node = self.unique.get(key)
        if node is None:
            node = len(self.nodes)
            self.nodes.append(key)
            self.unique[key] = node
        return node

    def ite(self, f, g, h):
        if f == 1:
            return g
        if f == 0:
            return h
        if g == h:
            return g
        if g == 1 and h == 0:
            return f
        key = (f, g, h)
        if key in self.ite_memo:
            return self.ite_memo[key]
        v = min(self.nodes[f][0], self.nodes[g][0], self.nodes[h][0])

        def cof(x, high):
            xv, lo, hi = self.nodes[x]
            if x < 2 or xv != v:
                return x
            return hi if high else lo

        r = self.mk(v, self.ite(cof(f, 0), cof(g, 0), cof(h, 0)), self.ite(cof(f, 1), cof(g, 1), cof(h, 1)))
        self.ite_memo[key] = r
        return r

    def build(self, g: Formula) -> int:
        if g in self.build_memo:
            return self.build_memo[g]
        op = g.op
        if op == "true":
            r = 1
        elif op == "false":
            r = 0
        elif g in self.index:
            r = self.mk(self.index[g], 0, 1)
        elif op == "not":
            r = self.ite(self.build(g.args[0]), 0, 1)
        elif op == "and":
            r = 1
            for a in g.args:
                r = self.ite(r, self.build(a), 0)
        elif op == "or":
            r = 0
            for a in g.args:
                r = self.ite(r, 1, self.build(a))
        else:
            raise ValueError(f"unknown operator {op!r}")
        self.build_memo[g] = r
        return r

    def _prog_var(self, i: int, a: frozenset) -> int:
        key = (i, a)
        if key in self.var_prog_memo:
            return self.var_prog_memo[key]
        g = self.vars[i]
        me = self.mk(i, 0, 1)
        if g.op == "atom":
            r = 1 if g.name in a else 0
        elif g.op == "next":
            r = self.build(g.args[0])
        elif g.op == "until":
            left = self.prog(self.build(g.args[0]), a)
            right = self.prog(self.build(g.args[1]), a)
            r = self.ite(right, 1, self.ite(left, me, 0))
        elif g.op == "eventually":
            r = self.ite(self.prog(self.build(g.args[0]), a), 1, me)
        else:
            r = self.ite(self.prog(self.build(g.args[0]), a), me, 0)
        self.var_prog_memo[key] = r
        return r

    def prog(self, node: int, a: frozenset) -> int:
        if node < 2:
            return node
        key = (node, a)
        if key in self.prog_memo:
            return self.prog_memo[key]
        v, lo, hi = self.nodes[node]
        r = self.ite(self._prog_var(v, a), self.prog(hi, a), self.prog(lo, a))
        self.prog_memo[key] = r
        return r

    def last(self, node: int, a: frozenset) -> bool:
        while node >= 2:
            v, lo, hi = self.nodes[node]
            node = hi if last_value(self.vars[v], a) else lo
        return node == 1


def to_dfa(f: Formula, ap: Iterable[str], max_ap: int = DEFAULT_MAX_AP, max_states: int = 100_000) -> Dfa:
    """Compile ``f`` to a minimal DFA accepting exactly its nonempty models.

    States are ``(obligation, accepted)`` pairs; reading ``a`` moves to
    ``(progress(obligation, a), last_value(obligation, a))``.  Obligations are
    kept as canonical BDDs over the elementary subformulas of ``f``.
    """
    ap = tuple(sorted(set(ap)))
    if len(ap) > max_ap:
        raise AlphabetTooLargeError(f"|AP| = {len(ap)} exceeds the bound {max_ap}")
    missing = f.atoms() - set(ap)
    if missing:
        raise UndeclaredAtomError(f"atoms {sorted(missing)} are not in AP {list(ap)}")
    letters = all_letters(ap)
    bdd = _Bdd(f)
    start = (bdd.build(f), False)
    ids = {start: 0}
    order = [start]
    rows = []
    queue = deque([start])
    while queue:
        node, _ = queue.popleft()
        row = []
        for a in letters:
            succ = (bdd.prog(node, a), bdd.last(node, a))
            if succ not in ids:
                if len(ids) >= max_states:
                    raise RuntimeError(f"progression produced more than {max_states} states")
                ids[succ] = len(order)
                order.append(succ)
                queue.append(succ)
            row.append(ids[succ])
        rows.append(tuple(row))
    accepting = frozenset(i for i, (_, flag) in enumerate(order) if flag)
    return minimize(Dfa(ap, tuple(rows), 0, accepting, letters))


def minimize(d: Dfa) -> Dfa:
    """Moore partition refinement, then BFS renumbering over the sorted letters."""
    reach = [d.initial]
    seen = {d.initial}
    for q in reach:
        for dst in d.delta[q]:
            if dst not in seen:
                seen.add(dst)
                reach.append(dst)
    states = sorted(seen)
    block = {q: int(q in d.accepting) for q in states}
    n_blocks = len(set(block.values()))
    while True:
        sigs = {q: (block[q],) + tuple(block[dst] for dst in d.delta[q]) for q in states}
        numbering: dict = {}
        for q in states:
            numbering.setdefault(sigs[q], len(numbering))
        new_block = {q: numbering[sigs[q]] for q in states}
        if len(numbering) == n_blocks:
            block = new_block
            break
        block, n_blocks = new_block, len(numbering)

    rep = {}
    for q in states:
        rep.setdefault(block[q], q)
    new_id = {block[d.initial]: 0}
    queue = deque([block[d.initial]])
    rows = []
    while queue:
        b = queue.popleft()
        row = []
        for dst in d.delta[rep[b]]:
            db = block[dst]
            if db not in new_id:
                new_id[db] = len(new_id)
                queue.append(db)
            row.append(new_id[db])
        rows.append(tuple(row))
    accepting = frozenset(new_id[block[q]] for q in states if q in d.accepting)
    return Dfa(d.ap, tuple(rows), 0, accepting, d.letters)
