"""Command-line front end.

Exit codes: 0 success or check passed, 1 check failed, 2 usage or input error.
Summaries go to standard output; artifacts are written under ``--out``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis
from .game import GameFormatError, Strategy, game_from_dict
from .gridworld import ScenarioError, compile_scenario, rank_map, scenario_from_dict
from .ltlf import AlphabetTooLargeError, LtlfSyntaxError, UndeclaredAtomError, parse_ltlf, to_dfa
from .preference import PreferenceSpecError, build_preference_automaton, dumps_automaton, load_pref_spec
from .product import ProductError, build_product
from .rank import compute_ranks, rank_table_csv
from .solver import ndaswin, strategy_json

CHECKS = ("ndaswin", "nash", "constant-sum", "lemma3")


class UsageError(Exception):
    pass


INPUT_ERRORS = (UsageError, LtlfSyntaxError, UndeclaredAtomError, AlphabetTooLargeError, PreferenceSpecError,
                GameFormatError, ScenarioError, ProductError, analysis.EnumerationBoundError,
                analysis.ImproperStrategyError, OSError, json.JSONDecodeError, KeyError)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _ap(text: str | None):
    if text is None:
        return None
    return [a.strip() for a in text.split(",") if a.strip()]


def _cell(text: str) -> tuple:
    try:
        r, c = (int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad cell {text!r}; expected ROW,COL") from None
    return (r, c)


def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_game(args):
    """A game file, or a gridworld scenario compiled for ``--cell``."""
    data = _read_json(args.game)
    if "width" in data:
        if args.cell is None:
            raise UsageError("a scenario file needs --cell ROW,COL")
        return compile_scenario(scenario_from_dict(data), _cell(args.cell))
    return game_from_dict(data)


def _load_product(args):
    g = _load_game(args)
    spec = load_pref_spec(args.spec)
    return build_product(g, build_preference_automaton(spec, g.ap))


def _load_strategy(path, h, player=None):
    try:
        strat = Strategy.from_json(_read_json(path), h)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if player is not None and strat.player != player:
        raise UsageError(f"{path}: expected a P{player} strategy")
    return strat


def cmd_ltlf2dfa(args) -> int:
    if (args.formula is None) == (args.file is None):
        raise UsageError("give exactly one of --formula or a formula file")
    text = args.formula if args.formula is not None else Path(args.file).read_text(encoding="utf-8").strip()
    ap = _ap(args.ap)
    f = parse_ltlf(text, ap)
    d = to_dfa(f, ap if ap is not None else sorted(f.atoms()))
    out = Path(args.out)
    _write(out, f"{args.name}.json", _dump(d.to_json()))
    _write(out, f"{args.name}.dot", d.to_dot(args.name))
    print(f"states: {d.n_states}  transitions: {d.n_states * len(d.letters)}  accepting: {len(d.accepting)}")
    return 0


def cmd_pref2pdfa(args) -> int:
    pa = build_preference_automaton(load_pref_spec(args.spec), _ap(args.ap))
    out = Path(args.out)
    _write(out, "pdfa.json", json.dumps(json.loads(dumps_automaton(pa)), sort_keys=True, indent=1) + "\n")
    _write(out, "pdfa.dot", pa.to_dot())
    print(f"states: {pa.n_states}  classes: {len(pa.classes)}  kmax: {compute_ranks(pa.E).kmax}")
    return 0


def cmd_product(args) -> int:
    h = _load_product(args)
    out = Path(args.out)
    _write(out, "product.json", h.dumps() + "\n")
    _write(out, "ranks.csv", rank_table_csv(h.states, h.rank1, h.rank2))
    print(f"states: {h.n_states}  transitions: {len(h.dst)}  kmax: {h.rank1.kmax}  "
          f"constant-sum: {analysis.constant_sum_check(h)}")
    return 0


def cmd_solve(args) -> int:
    h = _load_product(args)
    res = ndaswin(h, args.player)
    out = Path(args.out)
    _write(out, "strategy.json", _dump(strategy_json(h, res)))
    print(f"player: {args.player}  level k: {res.level}  region: {int(res.region.sum())}/{h.n_states}  "
          f"aswin calls: {res.aswin_calls}  kmax: {h.ranks(args.player).kmax}")
    if args.player == 2:
        p1 = ndaswin(h, 1)
        k2max = h.rank2.kmax
        line = f"lemma6: P1 level {p1.level}, MaxRank2 against P1's strategy = k2max - k = {k2max - p1.level}"
        if h.n_states <= args.max_states and max(h.n1, h.n2) <= args.max_actions:
            chk = analysis.lemma6_check(h, p1.strategy, p1.level, (args.max_states, args.max_actions))
            line += f" (enumerated: {chk.details['best_max_rank2']}, {'holds' if chk else 'fails'})"
        print(line)
    return 0


def cmd_rankmap(args) -> int:
    sc = scenario_from_dict(_read_json(args.scenario))
    rm = rank_map(sc, load_pref_spec(args.spec), jobs=args.jobs, shared=args.jobs <= 1)
    _write(Path(args.out), "rankmap.csv", rm.to_csv())
    print(rm.to_text(), end="")
    print(f"aswin calls: {rm.aswin_calls}  product states: {rm.n_states}")
    return 0


def _opponent(args, h, pi1):
    if args.opponent == "uniform":
        return None
    if args.opponent == "best":
        return analysis.best_response(h, pi1)
    return _load_strategy(args.opponent, h, 2)


def cmd_simulate(args) -> int:
    h = _load_product(args)
    pi1 = _load_strategy(args.strategy, h, 1)
    est = analysis.estimate_outcomes(h, pi1, _opponent(args, h, pi1), runs=args.runs, seed=args.seed,
                                     horizon=args.horizon)
    report = {"runs": est.runs, "seed": args.seed, "opponent": args.opponent,
              "histogram": {str(k): v for k, v in est.histogram.items()},
              "nonterminated": est.nonterminated, "max_rank": est.max_rank}
    _write(Path(args.out), "simulate.json", _dump(report))
    hist = " ".join(f"{k}:{v}" for k, v in est.histogram.items())
    print(f"runs: {est.runs}  rank histogram: {hist or '-'}  cut by horizon: {est.nonterminated}")
    return 0


def cmd_verify(args) -> int:
    h = _load_product(args)
    bounds = (args.max_states, args.max_actions)
    if args.check == "constant-sum":
        res = analysis.CheckResult("constant-sum", analysis.constant_sum_check(h))
    else:
        if args.strategy is None:
            raise UsageError(f"--check {args.check} needs a P1 strategy file")
        pi1 = _load_strategy(args.strategy, h, 1)
        if args.check == "ndaswin":
            res = analysis.verify_ndaswin(h, pi1, bounds)
        elif args.check == "lemma3":
            res = analysis.lemma3_check(h, pi1)
        else:
            pi2 = _load_strategy(args.strategy2, h, 2) if args.strategy2 else ndaswin(h, 2).strategy
            res = analysis.check_nash(h, pi1, pi2, bounds)
    rep = analysis.report(args.check, str(args.game), res)
    _write(Path(args.out), "report.json", _dump(rep))
    print(f"{args.check}: {'pass' if res else 'fail'}")
    if not res and res.witness:
        print(json.dumps(res.witness, sort_keys=True))
    return 0 if res else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prefgames", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-cell solves")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    def out(q, default="."):
        q.add_argument("-o", "--out", default=default, help="output directory")

    def game(q, strategy=False):
        q.add_argument("game", help="game JSON, or a gridworld scenario JSON with --cell")
        q.add_argument("spec", help="preference specification")
        if strategy:
            q.add_argument("strategy", nargs="?", help="P1 strategy JSON")
        q.add_argument("--cell", help="drone A start cell ROW,COL for scenario input")
        out(q)

    def bounds(q):
        q.add_argument("--max-states", type=int, default=6, help="enumeration bound on states")
        q.add_argument("--max-actions", type=int, default=2, help="enumeration bound on actions per player")

    q = sub.add_parser("ltlf2dfa", parents=[common], help="compile an LTLf formula to a minimal DFA")
    q.add_argument("file", nargs="?", help="file holding one formula")
    q.add_argument("--formula", help="inline formula")
    q.add_argument("--ap", help="comma-separated atoms (default: the formula's atoms)")
    q.add_argument("--name", default="dfa", help="base name of the output files")
    out(q)
    q.set_defaults(func=cmd_ltlf2dfa)

    q = sub.add_parser("pref2pdfa", parents=[common], help="build the preference automaton of a specification")
    q.add_argument("spec")
    q.add_argument("--ap", help="comma-separated atoms (default: the specification's atoms)")
    out(q)
    q.set_defaults(func=cmd_pref2pdfa)

    q = sub.add_parser("product", parents=[common], help="build the product game and its rank tables")
    game(q)
    q.set_defaults(func=cmd_product)

    q = sub.add_parser("solve", parents=[common], help="synthesize a non-dominated almost-sure winning strategy")
    game(q)
    q.add_argument("--player", type=int, choices=(1, 2), default=1)
    bounds(q)
    q.set_defaults(func=cmd_solve)

    q = sub.add_parser("rankmap", parents=[common], help="smallest rank drone A can force from each start cell")
    q.add_argument("scenario")
    q.add_argument("spec")
    out(q)
    q.set_defaults(func=cmd_rankmap)

    q = sub.add_parser("simulate", parents=[common], help="seeded rollouts of a P1 strategy")
    game(q, strategy=True)
    q.add_argument("--opponent", default="uniform", help="uniform, best, or a P2 strategy JSON")
    q.add_argument("--runs", type=int, default=1000)
    q.add_argument("--horizon", type=int, default=1000, help="rollout step cap")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("verify", parents=[common], help="check a strategy against a solution concept")
    game(q, strategy=True)
    q.add_argument("--check", choices=CHECKS, required=True)
    q.add_argument("--strategy2", help="P2 strategy JSON for --check nash (default: synthesized)")
    bounds(q)
    q.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command == "simulate" and args.strategy is None:
        print("error: simulate needs a P1 strategy file", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
