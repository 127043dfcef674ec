"""Addressed oblivious-chase forests, triggers, blocking, and derivations."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .errors import AddressNotInForest, MalformedDerivation, NoBlockingTeam, NoMatch
from .rules import Address, Atom, Instance, Null, Rule, RuleSet, frontier_positions, match


@dataclass(frozen=True)
class Trigger:
    rule: str
    address: Address

    def __str__(self) -> str:
        return f"{self.rule}@{self.address}"

    def children(self, rs: RuleSet) -> List[Address]:
        k = rs.rule(self.rule).head_size
        return [self.address.child(self.rule, i) for i in range(1, k + 1)]


def rule_apply(rule: Rule, atom: Atom, at: Address) -> List[Atom]:
    """Head atoms of ``rule`` fired on ``atom``; existentials become nulls born at ``at``."""
    subst = match(rule.body, atom)
    if subst is None:
        raise NoMatch(f"body of {rule.id} does not map to {atom}")
    for z in rule.existential:
        subst[z] = Null(z, at, rule.id)
    return [Atom(h.predicate, tuple(subst[v.name] for v in h.args)) for h in rule.head]


def applicable_rules(rs: RuleSet, atom: Atom) -> List[Rule]:
    return [r for r in rs.rules if match(r.body, atom) is not None]


def compute_adr(rs: RuleSet, address: Address, cache: Optional[Dict[Address, Atom]] = None) -> Optional[Atom]:
    """The label of ``address`` in the full forest, or None if it is not a node."""
    if cache is not None and address in cache:
        return cache[address]
    if not address.symbols:
        atom = address.root
    else:
        parent = compute_adr(rs, address.parent, cache)
        rid, iota = address.last
        atom = None
        if parent is not None:
            rule = rs.rule(rid)
            if 1 <= iota <= rule.head_size and match(rule.body, parent) is not None:
                atom = rule_apply(rule, parent, address.parent)[iota - 1]
    if cache is not None:
        cache[address] = atom
    return atom


class LabeledForest:
    """A prefix-closed set of addresses together with their labels."""

    def __init__(self, rs: RuleSet, nodes: Mapping[Address, Atom]):
        self.rs = rs
        self._nodes: Dict[Address, Atom] = dict(nodes)

    @classmethod
    def of_instance(cls, rs: RuleSet, instance: Instance) -> "LabeledForest":
        return cls(rs, {Address(f): f for f in instance.facts})

    def __contains__(self, address: Address) -> bool:
        return address in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self):
        return iter(self._nodes)

    def adr(self, address: Address) -> Atom:
        try:
            return self._nodes[address]
        except KeyError:
            raise AddressNotInForest(str(address)) from None

    def items(self):
        return self._nodes.items()

    def addresses(self) -> List[Address]:
        return sorted(self._nodes, key=Address.sort_key)

    def atoms(self) -> Set[Atom]:
        return set(self._nodes.values())

    def triggers(self) -> List[Trigger]:
        out = []
        for a in self.addresses():
            for r in applicable_rules(self.rs, self._nodes[a]):
                out.append(Trigger(r.id, a))
        return out

    def is_active(self, trig: Trigger) -> bool:
        return trig.address in self and any(c not in self for c in trig.children(self.rs))

    def head_images(self, trig: Trigger) -> List[Atom]:
        return rule_apply(self.rs.rule(trig.rule), self.adr(trig.address), trig.address)

    def apply(self, trig: Trigger) -> "LabeledForest":
        nodes = dict(self._nodes)
        for c, atom in zip(trig.children(self.rs), self.head_images(trig)):
            nodes[c] = atom
        return LabeledForest(self.rs, nodes)

    def restrict(self, addresses: Iterable[Address]) -> "LabeledForest":
        return LabeledForest(self.rs, {a: self._nodes[a] for a in addresses})

    def __eq__(self, other) -> bool:
        return isinstance(other, LabeledForest) and self._nodes == other._nodes

    def __repr__(self) -> str:
        return f"LabeledForest({len(self._nodes)} nodes)"


def expand(instance: Instance, rs: RuleSet, depth: int) -> LabeledForest:
    nodes = {Address(f): f for f in instance.facts}
    layer = list(nodes)
    for _ in range(depth):
        nxt = []
        for a in layer:
            atom = nodes[a]
            for r in applicable_rules(rs, atom):
                for i, h in enumerate(rule_apply(r, atom, a), 1):
                    c = a.child(r.id, i)
                    nodes[c] = h
                    nxt.append(c)
        layer = nxt
    return LabeledForest(rs, nodes)


# ---------------------------------------------------------------- blocking

def team_blocks(rule: Rule, heads: Sequence[Atom], team: Sequence[Atom]) -> bool:
    """Whether ``team`` witnesses the head atoms ``heads`` of a trigger of ``rule``.

    Predicates agree, frontier positions carry the same terms, and head-term
    equalities are reproduced in the team.
    """
    if len(team) != len(heads):
        return False
    fp = frontier_positions(rule)
    image: Dict[object, object] = {}
    for iota, (h, t) in enumerate(zip(heads, team), 1):
        if h.predicate != t.predicate or h.arity != t.arity:
            return False
        for j, (ht, tt) in enumerate(zip(h.args, t.args), 1):
            if j in fp[iota] and ht != tt:
                return False
            if image.setdefault(ht, tt) != tt:
                return False
    return True


def is_blocking_team(forest: LabeledForest, team: Sequence[Address], trig: Trigger) -> bool:
    rule = forest.rs.rule(trig.rule)
    if len(team) != rule.head_size:
        raise ValueError(f"team size {len(team)} != head size {rule.head_size}")
    heads = forest.head_images(trig)
    return team_blocks(rule, heads, [forest.adr(v) for v in team])


def slot_candidates(rule: Rule, heads: Sequence[Atom], nodes: Iterable[Tuple[Address, Atom]]) -> List[List[Address]]:
    """Per head atom, the nodes agreeing with it on predicate and frontier terms."""
    fp = frontier_positions(rule)
    nodes = list(nodes)
    out = []
    for iota, h in enumerate(heads, 1):
        cands = []
        for a, atom in nodes:
            if atom.predicate != h.predicate or atom.arity != h.arity:
                continue
            if all(atom.args[j - 1] == h.args[j - 1] for j in fp[iota]):
                cands.append(a)
        out.append(sorted(cands, key=Address.sort_key))
    return out


def is_blocked(forest: LabeledForest, trig: Trigger) -> Optional[List[Address]]:
    """The first blocking team in (length, lexicographic) order, or None."""
    rule = forest.rs.rule(trig.rule)
    heads = forest.head_images(trig)
    cands = slot_candidates(rule, heads, forest.items())
    for team in itertools.product(*cands):
        if team_blocks(rule, heads, [forest.adr(v) for v in team]):
            return list(team)
    return None


# ---------------------------------------------------------------- derivations

@dataclass
class Derivation:
    rs: RuleSet
    instance: Instance
    triggers: List[Trigger]
    truncated: bool = False

    def steps(self) -> List[LabeledForest]:
        """Forests G_0 .. G_n; raises MalformedDerivation if some trigger is not active."""
        g = LabeledForest.of_instance(self.rs, self.instance)
        out = [g]
        for n, t in enumerate(self.triggers):
            if t.address not in g:
                raise MalformedDerivation(f"step {n}: {t.address} not yet created")
            if match(self.rs.rule(t.rule).body, g.adr(t.address)) is None:
                raise MalformedDerivation(f"step {n}: {t.rule} does not apply at {t.address}")
            if not g.is_active(t):
                raise MalformedDerivation(f"step {n}: trigger {t} already applied")
            g = g.apply(t)
            out.append(g)
        return out

    def final(self) -> LabeledForest:
        return self.steps()[-1]

    def __len__(self) -> int:
        return len(self.triggers)


@dataclass
class ValidationReport:
    kind: str
    valid: Optional[bool]
    violation: Optional[str] = None
    starving: List[Trigger] = field(default_factory=list)
    diagnostic: Optional[str] = None


def active_unblocked(forest: LabeledForest) -> List[Trigger]:
    return [t for t in forest.triggers() if forest.is_active(t) and is_blocked(forest, t) is None]


def validate_derivation(d: Derivation, kind: str, horizon: Optional[int] = None) -> ValidationReport:
    steps = d.steps()
    if kind == "restricted":
        for n, t in enumerate(d.triggers):
            team = is_blocked(steps[n], t)
            if team is not None:
                return ValidationReport(kind, False, f"step {n}: {t} blocked by {[str(v) for v in team]}")
        return ValidationReport(kind, True)
    if kind == "oblivious":
        depth = horizon if horizon is not None else max((len(a) for a in steps[-1]), default=0)
        full = set(expand(d.instance, d.rs, depth))
        have = {a for a in steps[-1] if len(a) <= depth}
        missing = sorted(full - have, key=Address.sort_key)
        if missing:
            return ValidationReport(kind, False, f"missing address {missing[0]}")
        return ValidationReport(kind, True)
    if kind == "fair":
        starving = active_unblocked(steps[-1])
        if d.truncated:
            diag = f"{len(starving)} starving triggers so far" if starving else None
            return ValidationReport(kind, None, None, starving, diag)
        if starving:
            return ValidationReport(kind, False, f"{starving[0]} is active and unblocked", starving)
        return ValidationReport(kind, True)
    raise ValueError(f"unknown derivation kind {kind!r}")


def _is_subsequence(short: Sequence, long: Sequence) -> Optional[List[int]]:
    pos, it = [], 0
    for x in short:
        while it < len(long) and long[it] != x:
            it += 1
        if it == len(long):
            return None
        pos.append(it)
        it += 1
    return pos


def check_mixed(m: Derivation, r: Derivation) -> bool:
    """Whether ``r`` is a subsequence of ``m`` whose triggers are unblocked at their place in ``m``."""
    m_steps = m.steps()
    r.steps()
    if _is_subsequence(r.triggers, m.triggers) is None:
        return False
    in_r = set(r.triggers)
    for n, t in enumerate(m.triggers):
        if t in in_r and is_blocked(m_steps[n], t) is not None:
            return False
    return True


def restrict_derivation(m: Derivation) -> Derivation:
    """Greedy restricted subsequence: keep a trigger iff it is present and unblocked so far."""
    m.steps()
    g = LabeledForest.of_instance(m.rs, m.instance)
    kept = []
    for t in m.triggers:
        if t.address in g and g.is_active(t) and is_blocked(g, t) is None:
            kept.append(t)
            g = g.apply(t)
    return Derivation(m.rs, m.instance, kept, m.truncated)


def oblivious_bfs(instance: Instance, rs: RuleSet, depth: int) -> Derivation:
    """All triggers at addresses shorter than ``depth``, in breadth-first order."""
    f = expand(instance, rs, depth)
    trigs = [t for t in f.triggers() if len(t.address) < depth]
    return Derivation(rs, instance, trigs, truncated=True)


# ---------------------------------------------------------------- proof gadgets

def rank(address: Address, rset: Set[Address]) -> int:
    if address in rset:
        return 0
    n = len(address)
    while n > 0 and Address(address.root, address.symbols[:n]) not in rset:
        n -= 1
    if Address(address.root, address.symbols[:n]) not in rset:
        raise ValueError(f"{address} has no ancestor in the restricted set")
    return len(address) - n


def global_terms(forest: LabeledForest, rset: Set[Address]) -> Set[object]:
    return {t for a in rset for t in forest.adr(a).args}


def is_prettier(forest: LabeledForest, u: Address, w: Address, rset: Optional[Set[Address]] = None) -> bool:
    """Whether some homomorphism maps adr(u) onto adr(w) fixing every global term."""
    au, aw = forest.adr(u), forest.adr(w)
    if au.predicate != aw.predicate or au.arity != aw.arity:
        return False
    glob = global_terms(forest, set(rset) if rset is not None else set(forest))
    image: Dict[object, object] = {}
    for x, y in zip(au.args, aw.args):
        if x in glob and x != y:
            return False
        if image.setdefault(x, y) != y:
            return False
    return True


def border_triggers(forest: LabeledForest, rset: Set[Address]) -> List[Trigger]:
    out = []
    for a in sorted(rset, key=Address.sort_key):
        for r in applicable_rules(forest.rs, forest.adr(a)):
            t = Trigger(r.id, a)
            if any(c not in rset for c in t.children(forest.rs)):
                out.append(t)
    return out


def find_blockers(forest: LabeledForest, rset: Set[Address]) -> Dict[Trigger, List[Address]]:
    """Pick a blocking team inside ``rset`` for every border trigger."""
    inner = forest.restrict(rset)
    out = {}
    for t in border_triggers(forest, rset):
        team = is_blocked(inner, t)
        if team is None:
            raise NoBlockingTeam(f"border trigger {t} has no blocking team")
        out[t] = team
    return out


class ProofGadgets:
    """Rank, the better-address map and its iteration for a restricted set."""

    def __init__(self, rs: RuleSet, rset: Set[Address], blockers: Mapping[Trigger, Sequence[Address]]):
        self.rs = rs
        self.rset = set(rset)
        self.blockers = dict(blockers)
        self._adr: Dict[Address, Atom] = {}

    def adr(self, address: Address) -> Optional[Atom]:
        return compute_adr(self.rs, address, self._adr)

    def rank(self, address: Address) -> int:
        return rank(address, self.rset)

    def _border_split(self, address: Address) -> Tuple[Trigger, int, Tuple]:
        n = len(address) - self.rank(address)
        owner = Address(address.root, address.symbols[:n])
        rid, iota = address.symbols[n]
        return Trigger(rid, owner), iota, address.symbols[n + 1:]

    def btr(self, address: Address) -> Address:
        """Better version of a child of a border trigger."""
        trig, iota, rest = self._border_split(address)
        if rest:
            raise ValueError(f"{address} is not a child of a border trigger")
        return self._team(trig)[iota - 1]

    def _team(self, trig: Trigger) -> Sequence[Address]:
        try:
            return self.blockers[trig]
        except KeyError:
            raise NoBlockingTeam(f"no blocking team given for border trigger {trig}") from None

    def nabla(self, address: Address) -> Address:
        if address in self.rset:
            return address
        trig, iota, rest = self._border_split(address)
        return self._team(trig)[iota - 1].extend(rest)

    def nabla_star(self, address: Address) -> Address:
        while address not in self.rset:
            nxt = self.nabla(address)
            assert self.rank(nxt) < self.rank(address)
            address = nxt
        return address


def btr_map(forest: LabeledForest, rset: Set[Address], blockers: Mapping[Trigger, Sequence[Address]]) -> Dict[Address, Address]:
    """Map every forest address to the restricted address the better-map iteration reaches."""
    g = ProofGadgets(forest.rs, rset, blockers)
    return {a: g.nabla_star(a) for a in forest.addresses()}


# ---------------------------------------------------------------- running

@dataclass
class TraceEvent:
    rule: str
    address: Address
    blocked_by: Optional[List[Address]] = None

    def to_json(self) -> dict:
        out = {"rule": self.rule, "address": str(self.address)}
        if self.blocked_by is not None:
            out["blockedBy"] = [str(v) for v in self.blocked_by]
        return out


@dataclass
class ChaseRun:
    trace: List[TraceEvent]
    forest: LabeledForest
    complete: bool

    def derivation(self, instance: Instance) -> Derivation:
        applied = [Trigger(e.rule, e.address) for e in self.trace if e.blocked_by is None]
        return Derivation(self.forest.rs, instance, applied, truncated=not self.complete)


def run_chase(
    rs: RuleSet,
    instance: Instance,
    mode: str = "restricted",
    max_steps: int = 100,
    strategy: str = "fifo",
    seed: Optional[int] = None,
    horizon: Optional[int] = None,
) -> ChaseRun:
    """Run an oblivious or restricted chase, recording applied and blocked triggers."""
    if mode not in ("oblivious", "restricted"):
        raise ValueError(f"unknown mode {mode!r}")
    if strategy not in ("fifo", "random"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if (strategy == "random") != (seed is not None):
        raise ValueError("a seed is required exactly when the strategy is random")
    rng = random.Random(seed)
    g = LabeledForest.of_instance(rs, instance)
    queue = g.triggers()
    trace: List[TraceEvent] = []
    applied = 0
    while queue and applied < max_steps:
        idx = 0 if strategy == "fifo" else rng.randrange(len(queue))
        t = queue.pop(idx)
        if horizon is not None and len(t.address) >= horizon:
            continue
        if mode == "restricted":
            team = is_blocked(g, t)
            if team is not None:
                trace.append(TraceEvent(t.rule, t.address, team))
                continue
        g = g.apply(t)
        applied += 1
        trace.append(TraceEvent(t.rule, t.address))
        for c in t.children(rs):
            queue.extend(Trigger(r.id, c) for r in applicable_rules(rs, g.adr(c)))
    return ChaseRun(trace, g, complete=not queue)


# ---------------------------------------------------------------- export

def forest_to_json(forest: LabeledForest) -> List[dict]:
    out = []
    for a in forest.addresses():
        out.append({
            "root": str(a.root),
            "address": a.symbol_strings(),
            "atom": str(forest.adr(a)),
            "parent": a.parent.symbol_strings() if a.parent is not None else None,
        })
    return out


def _dot_id(a: Address, roots: List[Atom]) -> str:
    return '"n' + str(roots.index(a.root)) + "".join(f"/{r}:{i}" for r, i in a.symbols) + '"'


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def forest_to_dot(forest: LabeledForest) -> str:
    addrs = forest.addresses()
    roots = []
    for a in addrs:
        if a.root not in roots:
            roots.append(a.root)
    lines = ["digraph forest {", "  node [shape=box];"]
    for a in addrs:
        label = _dot_escape(f"{a} | {forest.adr(a)}")
        lines.append(f'  {_dot_id(a, roots)} [label="{label}"];')
    for a in addrs:
        if a.parent is not None:
            r, i = a.last
            lines.append(f'  {_dot_id(a.parent, roots)} -> {_dot_id(a, roots)} [label="{r}{i}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
