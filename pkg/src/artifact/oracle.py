"""Brute-force exploration of restricted derivations, used to cross-check ``decide``.

The explorer walks all orders of active unblocked triggers depth first.  A
branch that runs out of such triggers is a finite fair restricted run.  A
branch that reaches a state whose shape signature already occurred earlier on
the same branch, after every trigger pending back then was discharged, repeats
forever and is reported as an infinite pattern.

Fairness is enforced with a bounded delay: once a pending trigger has waited
``window`` steps, only overdue triggers may be applied.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .chase import LabeledForest, Trigger, applicable_rules, is_blocked
from .rules import Address, Atom, Constant, Instance, RuleSet, enumerate_critical_atoms
from .termination import Bounds, check_witness, decide_atom


@dataclass
class ExploreBounds:
    max_len: int = 12
    max_branch: int = 20000
    window: int = 4
    max_perm: int = 24


@dataclass
class ExplorationResult:
    status: str  # AllTerminate | InfinitePattern | Inconclusive
    bound: int = 0
    trace: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"status": self.status, "bound": self.bound, "stats": self.stats}
        if self.trace is not None:
            out["trace"] = self.trace
        return out


def _trig_json(t: Trigger) -> dict:
    return {"rule": t.rule, "address": str(t.address)}


# ---------------------------------------------------------------- signatures

def _term_tag(t, live: Dict[object, int], local: Dict[object, int]):
    if isinstance(t, Constant):
        return ("c", t.name)
    if t in live:
        return ("l", live[t])
    return ("d", local.setdefault(t, len(local)))


def _shape(atoms: Sequence[Atom], live: Dict[object, int]) -> tuple:
    local: Dict[object, int] = {}
    return tuple((a.predicate, tuple(_term_tag(t, live, local) for t in a.args)) for a in atoms)


def _linked_index_groups(atoms: List[Atom], live, k: int) -> List[Tuple[int, ...]]:
    """Index tuples of connected groups of up to ``k`` atoms, linked through non-live nulls."""
    dead = [{t for t in a.args if not isinstance(t, Constant) and t not in live} for a in atoms]
    by_term: Dict[object, List[int]] = {}
    for i, ts in enumerate(dead):
        for t in ts:
            by_term.setdefault(t, []).append(i)
    adj = [set() for _ in atoms]
    for ids in by_term.values():
        for i in ids:
            adj[i].update(ids)
    out = set()
    sets = {frozenset([i]) for i in range(len(atoms))}
    for _ in range(2, k + 1):
        sets = {s | {j} for s in sets for i in s for j in adj[i] if j not in s}
        for s in sets:
            out.update(itertools.permutations(sorted(s)))
    return sorted(out)


def signature(forest: LabeledForest, pending: Sequence[Trigger], max_perm: int = 24) -> tuple:
    """Isomorphism-invariant summary of what can still happen from ``forest``.

    Live terms are the nulls of pending trigger atoms; they get canonical
    names.  All other nulls are anonymous, so two states with equal
    signatures differ only in parts that can no longer influence blocking.
    """
    rs = forest.rs
    p_atoms = [(t.rule, forest.adr(t.address)) for t in pending]
    live_terms = []
    for _, a in p_atoms:
        for t in a.args:
            if not isinstance(t, Constant) and t not in live_terms:
                live_terms.append(t)
    live_set = set(live_terms)
    atoms = sorted(forest.atoms(), key=str)
    groups_ix = _linked_index_groups(atoms, live_set, rs.max_head_size) if rs.max_head_size > 1 else []

    # colour refinement on live terms
    p_occ: Dict[object, List[tuple]] = {t: [] for t in live_terms}
    f_occ: Dict[object, List[tuple]] = {t: [] for t in live_terms}
    for r, a in p_atoms:
        for j, x in enumerate(a.args):
            if x in live_set:
                p_occ[x].append((r, a.predicate, j, a.args))
    for a in atoms:
        for j, x in enumerate(a.args):
            if x in live_set:
                f_occ[x].append((a.predicate, j, a.args))
    color = {t: 0 for t in live_terms}
    for _ in range(3):
        tagged: Dict[tuple, tuple] = {}

        def tag(args):
            out = tagged.get(args)
            if out is None:
                out = tuple(("c", x.name) if isinstance(x, Constant) else ("l", color[x]) if x in live_set else ("d",)
                            for x in args)
                tagged[args] = out
            return out

        new = {}
        for t in live_terms:
            occ = sorted((r, p, j, tag(args)) for r, p, j, args in p_occ[t])
            occ2 = sorted((p, j, tag(args)) for p, j, args in f_occ[t])
            new[t] = (color[t], tuple(occ), tuple(occ2))
        palette = {c: i for i, c in enumerate(sorted(set(new.values())))}
        color = {t: palette[new[t]] for t in live_terms}

    ties: Dict[int, List[object]] = {}
    for t in live_terms:
        ties.setdefault(color[t], []).append(t)
    tie_lists = [ties[c] for c in sorted(ties)]
    n_orders = 1
    for g in tie_lists:
        for i in range(2, len(g) + 1):
            n_orders *= i

    def build(order: List[object]) -> tuple:
        live = {t: i for i, t in enumerate(order)}
        pend = tuple(sorted((r, _shape([a], live)) for r, a in p_atoms))
        singles = tuple(sorted({_shape([a], live) for a in atoms}))
        linked = tuple(sorted({_shape([atoms[i] for i in g], live) for g in groups_ix}))
        return pend, singles, linked

    if n_orders <= max_perm:
        best = min(build([t for g in choice for t in g])
                   for choice in itertools.product(*[itertools.permutations(g) for g in tie_lists]))
    else:
        # too many ties: a fixed order keeps equal signatures meaningful, at the cost of missed matches
        best = build([t for g in tie_lists for t in sorted(g, key=str)])
    return best


# ---------------------------------------------------------------- search

def _pending(forest: LabeledForest, candidates: Sequence[Trigger]) -> Tuple[List[Trigger], int]:
    """Active unblocked triggers among ``candidates``, in address then rule order.

    Blocking and inactivity are both preserved as the forest grows, so a
    child state only needs to re-check its parent's pending triggers and the
    triggers at the freshly created addresses.
    """
    out, blocked = [], 0
    order = forest.rs.rule_index
    for t in sorted(set(candidates), key=lambda t: (t.address.sort_key(), order(t.rule))):
        if not forest.is_active(t):
            continue
        if is_blocked(forest, t) is None:
            out.append(t)
        else:
            blocked += 1
    return out, blocked


def explore(instance: Instance, rs: RuleSet, bounds: Optional[ExploreBounds] = None) -> ExplorationResult:
    bounds = bounds or ExploreBounds()
    stats = {"states": 0, "maximal": 0, "maxLength": 0, "blockedTriggers": 0, "truncated": 0}
    visited = set()
    found: List[dict] = []
    start = LabeledForest.of_instance(rs, instance)

    class _Stop(Exception):
        pass

    def dfs(forest, cands, ages: Dict[Trigger, int], path: List[Trigger], sigs: List[tuple], pend_hist: List[frozenset]):
        pending, blocked = _pending(forest, cands)
        stats["blockedTriggers"] += blocked
        key = (frozenset(forest), tuple(sorted(((t.rule, t.address.sort_key()), min(ages.get(t, 0), bounds.window)) for t in pending)))
        if key in visited:
            return
        visited.add(key)
        stats["states"] += 1
        if stats["states"] > bounds.max_branch:
            raise _Stop()
        if not pending:
            stats["maximal"] += 1
            stats["maxLength"] = max(stats["maxLength"], len(path))
            return
        sig = signature(forest, pending, bounds.max_perm)
        now = frozenset(pending)
        for m in range(len(sigs)):
            if sigs[m] == sig and not (pend_hist[m] & now):
                found.append({
                    "prefix": [_trig_json(t) for t in path[:m]],
                    "loop": [_trig_json(t) for t in path[m:]],
                })
                raise _Stop()
        if len(path) >= bounds.max_len:
            stats["truncated"] += 1
            return
        ages = {t: ages.get(t, 0) for t in pending}
        overdue = [t for t in pending if ages[t] >= bounds.window]
        for t in overdue or pending:
            nxt_ages = {s: a + 1 for s, a in ages.items() if s != t}
            g = forest.apply(t)
            fresh = [Trigger(r.id, c) for c in t.children(rs) if c not in forest for r in applicable_rules(rs, g.adr(c))]
            dfs(g, pending + fresh, nxt_ages, path + [t], sigs + [sig], pend_hist + [now])

    try:
        dfs(start, start.triggers(), {}, [], [], [])
    except _Stop:
        pass
    except RecursionError:  # pragma: no cover
        return ExplorationResult("Inconclusive", bounds.max_len, None, stats)
    if found:
        return ExplorationResult("InfinitePattern", len(found[0]["prefix"]) + len(found[0]["loop"]), found[0], stats)
    if stats["states"] > bounds.max_branch or stats["truncated"]:
        bound = bounds.max_branch if stats["states"] > bounds.max_branch else bounds.max_len
        return ExplorationResult("Inconclusive", bound, None, stats)
    return ExplorationResult("AllTerminate", stats["maxLength"], None, stats)


# ---------------------------------------------------------------- cross validation

@dataclass
class AtomReport:
    atom: str
    decide_verdict: str
    oracle_status: str
    agree: bool
    note: str = ""

    def to_json(self) -> dict:
        out = {"atom": self.atom, "decideVerdict": self.decide_verdict, "oracleStatus": self.oracle_status, "agree": self.agree}
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class CrossReport:
    atoms: List[AtomReport]

    @property
    def agree(self) -> bool:
        return all(a.agree for a in self.atoms)

    def to_json(self) -> dict:
        return {"agree": self.agree, "atoms": [a.to_json() for a in self.atoms]}


def cross_validate(rs: RuleSet, bounds: Optional[Bounds] = None, ebounds: Optional[ExploreBounds] = None) -> CrossReport:
    bounds = bounds or Bounds()
    out = []
    for omega in enumerate_critical_atoms(rs):
        res = decide_atom(rs, omega, bounds)
        ex = explore(Instance((omega,)), rs, ebounds)
        agree, note = True, ""
        if res.verdict == "Terminating" and ex.status == "InfinitePattern":
            agree, note = False, "oracle found an infinite fair run"
        elif res.verdict == "NonTerminating":
            depth = 2 * max(bounds.check_depth or 0, 10)
            if not check_witness(rs, res.witness, depth):
                agree, note = False, "witness fails concrete replay"
            elif ex.status == "AllTerminate":
                agree, note = False, "every explored run halts"
        out.append(AtomReport(str(omega), res.verdict, ex.status, agree, note))
    return CrossReport(out)
