"""Command-line entry point: run, decide, oracle, graph.

Exit codes: 0 terminating (or success), 1 non-terminating, 2 unknown,
64 usage error, 65 malformed input, 66 unreadable file, 70 oracle disagreement.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .abstract import build_graph
from .chase import forest_to_dot, forest_to_json, run_chase
from .errors import ArtifactError
from .oracle import ExploreBounds, cross_validate, explore
from .rules import enumerate_critical_atoms, parse_atom, parse_instance, parse_ruleset
from .termination import Bounds, decide

EX_USAGE, EX_DATAERR, EX_NOINPUT, EX_SOFTWARE = 64, 65, 66, 70
VERDICT_STATUS = {"Terminating": 0, "NonTerminating": 1, "Unknown": 2}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="artifact", description="Chase runs and restricted-chase termination for linear rules.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="run the chase on an instance")
    run.add_argument("--rules", required=True)
    run.add_argument("--instance", required=True)
    run.add_argument("--mode", choices=["oblivious", "restricted"], default="restricted")
    run.add_argument("--max-steps", type=_positive, default=100)
    run.add_argument("--strategy", choices=["fifo", "random"], default="fifo")
    run.add_argument("--seed", type=int)
    run.add_argument("--format", choices=["json", "dot"], default="json")
    run.add_argument("--horizon", type=_positive)

    dec = sub.add_parser("decide", help="decide termination on all instances")
    dec.add_argument("--rules", required=True)
    dec.add_argument("--max-stem", type=_positive)
    dec.add_argument("--max-cycle", type=_positive)
    dec.add_argument("--check-depth", "--horizon", dest="check_depth", type=_positive)

    ora = sub.add_parser("oracle", help="explore restricted derivations, or cross-validate decide")
    ora.add_argument("--rules", required=True)
    ora.add_argument("--instance")
    ora.add_argument("--max-len", "--horizon", dest="max_len", type=_positive, default=12)
    ora.add_argument("--max-branch", type=_positive, default=20000)

    gr = sub.add_parser("graph", help="export the abstract graph")
    gr.add_argument("--rules", required=True)
    gr.add_argument("--atom")
    gr.add_argument("--format", choices=["dot", "json"], default="dot")
    return p


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise FileNotFoundError(f"{path}: {exc.strerror}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _cmd_run(args, out) -> int:
    if (args.strategy == "random") != (args.seed is not None):
        raise UsageError("--seed is required exactly when --strategy random")
    rs = parse_ruleset(_read(args.rules))
    inst = parse_instance(_read(args.instance), rs)
    res = run_chase(rs, inst, args.mode, args.max_steps, args.strategy, args.seed, args.horizon)
    if args.format == "dot":
        out.write(forest_to_dot(res.forest))
    else:
        out.write(_dump({
            "mode": args.mode,
            "complete": res.complete,
            "trace": [e.to_json() for e in res.trace],
            "forest": forest_to_json(res.forest),
        }))
    return 0


def _cmd_decide(args, out) -> int:
    rs = parse_ruleset(_read(args.rules))
    v = decide(rs, Bounds(max_stem=args.max_stem, max_cycle=args.max_cycle, check_depth=args.check_depth))
    out.write(_dump(v.to_json()))
    return VERDICT_STATUS[v.kind]


def _cmd_oracle(args, out) -> int:
    rs = parse_ruleset(_read(args.rules))
    eb = ExploreBounds(max_len=args.max_len, max_branch=args.max_branch)
    if args.instance is not None:
        inst = parse_instance(_read(args.instance), rs)
        out.write(_dump(explore(inst, rs, eb).to_json()))
        return 0
    rep = cross_validate(rs, Bounds(), eb)
    out.write(_dump(rep.to_json()))
    if not rep.agree:
        sys.stderr.write("disagreement between decide and the oracle\n")
        return EX_SOFTWARE
    return 0


def _cmd_graph(args, out) -> int:
    rs = parse_ruleset(_read(args.rules))
    atoms = [parse_atom(args.atom)] if args.atom else enumerate_critical_atoms(rs)
    for a in atoms:
        if rs.arity(a.predicate) != a.arity:
            raise UsageError(f"atom {a} does not fit the signature")
    graphs = [build_graph(rs, a) for a in atoms]
    if args.format == "json":
        out.write(_dump([g.to_json() for g in graphs]))
    else:
        out.write("".join(g.to_dot() for g in graphs))
    return 0


COMMANDS = {"run": _cmd_run, "decide": _cmd_decide, "oracle": _cmd_oracle, "graph": _cmd_graph}


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EX_USAGE
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EX_NOINPUT
    except ArtifactError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EX_DATAERR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
