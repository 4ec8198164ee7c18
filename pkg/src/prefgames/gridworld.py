"""Two-drone delivery gridworld compiled to a concurrent game, plus start-cell rank maps.

Cells are ``(row, col)`` with row 0 at the top; ``N`` decreases the row.
Drone A (P1) collects packages by entering pickup cells and delivers them by
entering the matching destination.  Drone B (P2) disables A when B plays
``attack`` and A ends the round on B's cell.  Both drones slip: the intended
cell gets ``1 - slip`` and the slip mass is shared by the valid cells to the
left and right of the intended direction.  Mass aimed at an invalid cell
stays put.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .game import ConcurrentGame, parse_probability
from .preference import PrefSpec, build_preference_automaton
from .product import build_product
from .solver import aswin, ndaswin

__all__ = [
    "GridScenario", "ScenarioError", "ACTIONS", "load_scenario", "scenario_from_dict", "move_distribution",
    "compile_scenario", "compile_many", "rank_map", "RankMap", "start_state_name", "synthesize",
]

ACTIONS = ("N", "E", "S", "W", "attack")
_DELTA = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
_LATERAL = {"N": ("E", "W"), "S": ("E", "W"), "E": ("N", "S"), "W": ("N", "S")}
AT_SOURCE, CARRIED, DELIVERED = 0, 1, 2


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GridScenario:
    width: int
    height: int
    nogo: frozenset
    pickups: tuple
    dests: tuple
    b_start: tuple
    a_starts: tuple | None = None
    slip: Fraction = Fraction(1, 5)
    horizon: int | None = 10
    b_attack: bool = True
    exclude: tuple = ("nogo", "pickups", "dests", "b_start")
    note: str = ""

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ScenarioError("; ".join(problems))

    def problems(self) -> list:
        out = []
        if self.width < 1 or self.height < 1:
            out.append("grid must be at least 1x1")
        if not 0 <= self.slip < 1:
            out.append("slip must lie in [0, 1)")
        if self.horizon is not None and self.horizon < 1:
            out.append("horizon must be at least 1")
        if len(self.pickups) != len(self.dests):
            out.append("every pickup needs a destination")
        if len(self.pickups) > 3:
            out.append("at most 3 packages are supported")
        cells = [("b_start", self.b_start)] + [(f"p{i + 1}", c) for i, c in enumerate(self.pickups)] + \
                [(f"d{i + 1}", c) for i, c in enumerate(self.dests)] + \
                [("a_start", c) for c in (self.a_starts or ())]
        for what, c in cells:
            if not self.valid(c):
                out.append(f"{what} {tuple(c)} is not a valid cell")
        return out

    @property
    def n_packages(self) -> int:
        return len(self.pickups)

    @property
    def ap(self) -> tuple:
        return tuple(f"d{i + 1}" for i in range(self.n_packages)) + ("o",)

    def inside(self, c) -> bool:
        return 0 <= c[0] < self.height and 0 <= c[1] < self.width

    def valid(self, c) -> bool:
        return self.inside(c) and tuple(c) not in self.nogo

    def cells(self) -> list:
        return [(r, c) for r in range(self.height) for c in range(self.width)]

    def start_cells(self) -> list:
        """Cells allowed as drone A's start, in row-major order."""
        banned = set()
        if "pickups" in self.exclude:
            banned |= set(self.pickups)
        if "dests" in self.exclude:
            banned |= set(self.dests)
        if "b_start" in self.exclude:
            banned.add(self.b_start)
        pool = self.a_starts if self.a_starts is not None else self.cells()
        return [c for c in pool if self.valid(c) and c not in banned]

    def to_dict(self) -> dict:
        d = {
            "width": self.width, "height": self.height,
            "nogo": [list(c) for c in sorted(self.nogo)],
            "pickups": {f"p{i + 1}": list(c) for i, c in enumerate(self.pickups)},
            "dests": {f"d{i + 1}": list(c) for i, c in enumerate(self.dests)},
            "b_start": list(self.b_start), "slip": str(self.slip), "horizon": self.horizon,
            "b_attack": self.b_attack, "exclude": list(self.exclude),
        }
        if self.a_starts is not None:
            d["a_starts"] = [list(c) for c in self.a_starts]
        if self.note:
            d["note"] = self.note
        return d

    def replace(self, **kw) -> "GridScenario":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return GridScenario(**d)


def _cell(x) -> tuple:
    if not isinstance(x, (list, tuple)) or len(x) != 2 or not all(isinstance(v, int) for v in x):
        raise ScenarioError(f"bad cell {x!r}; expected [row, col]")
    return (x[0], x[1])


def _numbered(d: dict, prefix: str) -> tuple:
    keys = sorted(d, key=lambda k: int(k[len(prefix):]) if k[len(prefix):].isdigit() else 10**9)
    expected = [f"{prefix}{i + 1}" for i in range(len(d))]
    if keys != expected:
        raise ScenarioError(f"{prefix}-cells must be named {expected}, got {sorted(d)}")
    return tuple(_cell(d[k]) for k in keys)


def scenario_from_dict(d: dict) -> GridScenario:
    try:
        return GridScenario(
            width=int(d["width"]), height=int(d["height"]),
            nogo=frozenset(_cell(c) for c in d.get("nogo", [])),
            pickups=_numbered(d["pickups"], "p"), dests=_numbered(d["dests"], "d"),
            b_start=_cell(d["b_start"]),
            a_starts=tuple(_cell(c) for c in d["a_starts"]) if d.get("a_starts") is not None else None,
            slip=parse_probability(d.get("slip", "0.2")), horizon=None if d.get("horizon", 10) is None else int(d.get("horizon", 10)),
            b_attack=bool(d.get("b_attack", True)),
            exclude=tuple(d.get("exclude", ("nogo", "pickups", "dests", "b_start"))),
            note=str(d.get("note", "")),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from None


def load_scenario(path) -> GridScenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def move_distribution(sc: GridScenario, cell, action: str) -> dict:
    """``{cell: probability}`` for one drone choosing ``action`` in ``cell``."""
    cell = tuple(cell)
    if action == "attack":
        return {cell: Fraction(1)}
    out: dict = {}

    def add(c, p):
        if p:
            c = c if sc.valid(c) else cell
            out[c] = out.get(c, Fraction(0)) + p

    dr, dc = _DELTA[action]
    add((cell[0] + dr, cell[1] + dc), 1 - sc.slip)
    sides = []
    for lat in _LATERAL[action]:
        lr, lc = _DELTA[lat]
        c = (cell[0] + lr, cell[1] + lc)
        if sc.valid(c):
            sides.append(c)
    if sides:
        for c in sides:
            add(c, sc.slip / len(sides))
    else:
        add(cell, sc.slip)
    return out


@dataclass
class _Tables:
    """Per-cell move outcomes padded to three entries."""
    cell_of: list
    index: dict
    dst: np.ndarray
    pid: np.ndarray
    probs: list
    joint: np.ndarray
    joint_probs: list
    one: int


def _tables(sc: GridScenario) -> _Tables:
    cells = [c for c in sc.cells() if sc.valid(c)]
    index = {c: i for i, c in enumerate(cells)}
    probs = [Fraction(0)]
    pidx = {Fraction(0): 0}
    nc, na = len(cells), len(ACTIONS)
    dst = np.zeros((nc, na, 3), dtype=np.int64)
    pid = np.zeros((nc, na, 3), dtype=np.int64)
    for i, c in enumerate(cells):
        for a, act in enumerate(ACTIONS):
            dist = sorted(move_distribution(sc, c, act).items())
            for k, (d, p) in enumerate(dist):
                if p not in pidx:
                    pidx[p] = len(probs)
                    probs.append(p)
                dst[i, a, k] = index[d]
                pid[i, a, k] = pidx[p]
            for k in range(len(dist), 3):
                dst[i, a, k] = i
    joint_probs = []
    jidx = {}
    joint = np.zeros((len(probs), len(probs)), dtype=np.int64)
    for x, p in enumerate(probs):
        for y, q in enumerate(probs):
            pq = p * q
            if pq not in jidx:
                jidx[pq] = len(joint_probs)
                joint_probs.append(pq)
            joint[x, y] = jidx[pq]
    if Fraction(1) not in jidx:
        jidx[Fraction(1)] = len(joint_probs)
        joint_probs.append(Fraction(1))
    return _Tables(cells, index, dst, pid, probs, joint, joint_probs, jidx[Fraction(1)])


def start_state_name(sc: GridScenario, cell) -> str:
    return _name(sc, cell, sc.b_start, (AT_SOURCE,) * sc.n_packages, 0, False)


def _name(sc, a, b, status, t, dis) -> str:
    pk = "".join("-cD"[s] for s in status)
    rnd = "" if sc.horizon is None else f"t{t}"
    return f"A{a[0]}{a[1]}B{b[0]}{b[1]}P{pk}{rnd}" + ("x" if dis else "")


def compile_many(sc: GridScenario, starts: Sequence, max_states: int = 3_000_000):
    """One game holding every state reachable from the given A start cells.

    Returns ``(game, init_ids)``; ``game.init`` is the first start.
    """
    starts = [tuple(c) for c in starts]
    for c in starts:
        if not sc.valid(c):
            raise ScenarioError(f"start cell {c} is not valid")
    tb = _tables(sc)
    nc, na, m = len(tb.cell_of), len(ACTIONS), sc.n_packages
    npk = 3 ** m
    H = sc.horizon
    pick = np.array([tb.index[c] for c in sc.pickups], dtype=np.int64)
    drop = np.array([tb.index[c] for c in sc.dests], dtype=np.int64)
    pow3 = 3 ** np.arange(m, dtype=np.int64)
    attack = ACTIONS.index("attack")

    def key(t, a, b, pk, d):
        return (((t * nc + a) * nc + b) * npk + pk) * 2 + d

    def unkey(k):
        d = k % 2
        k = k // 2
        pk = k % npk
        k = k // npk
        b = k % nc
        k = k // nc
        a = k % nc
        return k // nc, a, b, pk, d

    bi = tb.index[sc.b_start]
    level = np.unique(np.array([key(0, tb.index[c], bi, 0, 0) for c in starts], dtype=np.int64))
    all_keys, blocks = [], []
    total = 0
    while len(level):
        total += len(level)
        if total > max_states:
            raise ScenarioError(f"scenario exceeds {max_states} states")
        t, a, b, pk, d = unkey(level)
        n = len(level)
        absorbing = (d == 1) | (t >= H) if H is not None else d == 1
        # successor cells: [state, a1, a2, outcome of A, outcome of B]
        ad = tb.dst[a][:, :, None, :, None]
        ap_ = tb.pid[a][:, :, None, :, None]
        bd = tb.dst[b][:, None, :, None, :]
        bp = tb.pid[b][:, None, :, None, :]
        shape = (n, na, na, 3, 3)
        ad, bd = np.broadcast_to(ad, shape), np.broadcast_to(bd, shape)
        pid = tb.joint[np.broadcast_to(ap_, shape), np.broadcast_to(bp, shape)]
        live = (np.broadcast_to(ap_, shape) > 0) & (np.broadcast_to(bp, shape) > 0)
        hit = (ad == bd) & (np.arange(na)[None, None, :, None, None] == attack)
        if not sc.b_attack:
            hit = np.zeros(shape, dtype=bool)
        moved = ad != a[:, None, None, None, None]
        pk5 = np.broadcast_to(pk[:, None, None, None, None], shape)
        newpk = pk5.copy()
        for i in range(m):
            st = (pk5 // pow3[i]) % 3
            entered = moved & ~hit
            got = entered & (st == AT_SOURCE) & (ad == pick[i])
            st2 = np.where(got, CARRIED, st)
            done = entered & (st2 == CARRIED) & (ad == drop[i])
            st2 = np.where(done, DELIVERED, st2)
            newpk = newpk + (st2 - st) * pow3[i]
        nk = key(t[:, None, None, None, None] + (H is not None), ad, bd, newpk, hit.astype(np.int64))
        # absorbing states loop on themselves
        self_k = np.broadcast_to(level[:, None, None, None, None], shape)
        first = np.zeros(shape, dtype=bool)
        first[..., 0, 0] = True
        ab = absorbing[:, None, None, None, None]
        nk = np.where(ab, self_k, nk)
        live = np.where(ab, first, live)
        pid = np.where(ab, tb.one, pid)
        blocks.append((nk.reshape(n, -1), pid.reshape(n, -1), live.reshape(n, -1)))
        all_keys.append(level)
        nxt = nk[live & ~ab]
        level = np.unique(nxt)
        if H is None:
            # without a round counter the graph has cycles
            seen = np.concatenate(all_keys)
            level = level[~np.isin(level, seen)]
    keys = np.concatenate(all_keys)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    dst_parts, pid_parts, cnt_parts = [], [], []
    for nk, pid, live in blocks:
        n = nk.shape[0]
        per = live.reshape(n, na * na, 9)
        ids = order[np.searchsorted(sorted_keys, nk.reshape(n, na * na, 9)[per])]
        dst_parts.append(ids)
        pid_parts.append(pid.reshape(n, na * na, 9)[per])
        cnt_parts.append(per.sum(axis=2).ravel())
    cnt = np.concatenate(cnt_parts)
    ptr = np.zeros(len(cnt) + 1, dtype=np.int64)
    np.cumsum(cnt, out=ptr[1:])
    t, a, b, pk, d = unkey(keys)
    names, labels = [], []
    for ti, ai, bj, pki, di in zip(t.tolist(), a.tolist(), b.tolist(), pk.tolist(), d.tolist()):
        status = [(pki // 3 ** i) % 3 for i in range(m)]
        names.append(_name(sc, tb.cell_of[ai], tb.cell_of[bj], status, ti, di))
        labels.append(frozenset([f"d{i + 1}" for i in range(m) if status[i] == DELIVERED] + (["o"] if di else [])))
    g = ConcurrentGame(names, list(ACTIONS), list(ACTIONS), ptr, np.concatenate(dst_parts),
                       np.concatenate(pid_parts), list(tb.joint_probs), 0, sc.ap, labels)
    init_keys = np.array([key(0, tb.index[c], bi, 0, 0) for c in starts], dtype=np.int64)
    inits = order[np.searchsorted(sorted_keys, init_keys)]
    g.init = int(inits[0])
    return g, inits


def compile_scenario(sc: GridScenario, a_start, max_states: int = 3_000_000) -> ConcurrentGame:
    return compile_many(sc, [a_start], max_states)[0]


@dataclass
class RankMap:
    grid: np.ndarray
    aswin_calls: int = 0
    n_states: int = 0
    failures: dict = field(default_factory=dict)

    def __getitem__(self, cell) -> int:
        return int(self.grid[tuple(cell)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.grid.tolist())
        return buf.getvalue()

    def to_text(self) -> str:
        h, w = self.grid.shape
        lines = ["     " + " ".join(f"{c:>3}" for c in range(w))]
        for r in range(h):
            lines.append(f"{r:>3}  " + " ".join(f"{v:>3}" for v in self.grid[r].tolist()))
        return "\n".join(lines) + "\n"


def synthesize(sc: GridScenario, spec: PrefSpec, cell, level: int | None = None):
    """Product for one start cell and drone A's strategy for ``level`` (default: the best level)."""
    g = compile_scenario(sc, cell)
    h = build_product(g, build_preference_automaton(spec, sc.ap))
    if level is None:
        return h, ndaswin(h, 1)
    res = aswin(h, h.rank1.ranks <= level, 1)
    res.level = level
    return h, res


def _solve_cell(args):
    sc, spec, cell = args
    try:
        h, res = synthesize(sc, spec, cell)
    except ValueError as exc:  # state bound and friends: report the cell, keep going
        return cell, None, 0, 0, str(exc)
    return cell, res.level, res.aswin_calls, h.n_states, None


def rank_map(sc: GridScenario, spec: PrefSpec, jobs: int = 1, shared: bool = True) -> RankMap:
    """Smallest rank drone A can force from each start cell; -1 marks invalid starts.

    With ``shared`` all start cells live in one product and each rank level is
    solved once for all of them, so the whole map costs at most ``kmax + 1``
    almost-sure solves.  Otherwise every cell is solved on its own product,
    optionally in ``jobs`` worker processes.
    """
    grid = np.full((sc.height, sc.width), -1, dtype=np.int64)
    starts = sc.start_cells()
    out = RankMap(grid)
    if not starts:
        return out
    if shared:
        g, inits = compile_many(sc, starts)
        pa = build_preference_automaton(spec, sc.ap)
        h = build_product(g, pa, inits=inits)
        out.n_states = h.n_states
        ranks = h.rank1
        pending = dict(zip(starts, h.inits.tolist()))
        for k in range(ranks.kmax + 1):
            region = aswin(h, ranks.ranks <= k, 1).region
            out.aswin_calls += 1
            for c, v in list(pending.items()):
                if region[v]:
                    grid[c] = k
                    del pending[c]
            if not pending:
                break
        return out
    work = [(sc, spec, c) for c in starts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_solve_cell, work))
    else:
        results = [_solve_cell(w) for w in work]
    for c, k, calls, n, err in results:
        if err is not None:
            out.failures[c] = err
            continue
        grid[c] = k
        out.aswin_calls += calls
        out.n_states += n
    return out
