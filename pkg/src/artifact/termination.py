"""All-instances restricted-chase termination via ultimately periodic path witnesses.

For a critical atom, a witness is an infinite path through the chase tree,
given as a lasso (stem + cycle) over the abstract graph, such that

* the trigger extending the path at each node is not blocked by a team drawn
  from the addresses created before it (condition (i)), and
* for each path node ``u`` only finitely many later path triggers are blocked
  by teams that may use addresses off the path not below ``u`` (fragility).

Both conditions are evaluated on finite unrollings.  Fragility is reduced to
finitely many representatives: addresses off the path matter only up to an
isomorphism fixing the terms of the path node, and a repeated nonempty
per-period increment means infinite fragility.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .abstract import AbstractGraph, AbstractLabeling, build_graph, canonical, keys_block
from .chase import compute_adr, rule_apply, team_blocks
from .errors import HorizonTooSmall, MalformedWitness
from .rules import Address, Atom, Constant, RuleSet, Symbol, enumerate_critical_atoms, match


# ---------------------------------------------------------------- views

class AbstractView:
    """Term identities decoded from abstract labels; blocking from those identities."""

    name = "abstract"

    def __init__(self, rs: RuleSet, root: Atom):
        self.rs = rs
        self.lab = AbstractLabeling.open(rs, root)

    def exists(self, a: Address) -> bool:
        return self.lab.label(a) is not BOTTOM_

    def keys(self, a: Address):
        return self.lab.atom_keys(a)

    def head_keys(self, rule_id: str, a: Address):
        return self.lab.head_keys(self.rs.rule(rule_id), a)

    def is_const(self, key) -> bool:
        return key[0] == "c"

    def blocks(self, team: Sequence[Address], rule_id: str, a: Address) -> bool:
        rule = self.rs.rule(rule_id)
        return keys_block(rule, self.head_keys(rule_id, a), [self.keys(v) for v in team])

    def children(self, a: Address) -> List[Address]:
        lab = self.lab.label(a)
        return [a.child(r.id, i) for r in self.rs.rules if match(r.body, lab) is not None
                for i in range(1, r.head_size + 1)]


class ConcreteView:
    """Labels with provenance nulls; blocking by the direct team check on atoms."""

    name = "concrete"

    def __init__(self, rs: RuleSet, root: Atom):
        self.rs = rs
        self._adr: Dict[Address, Atom] = {}

    def atom(self, a: Address) -> Optional[Atom]:
        return compute_adr(self.rs, a, self._adr)

    def exists(self, a: Address) -> bool:
        return self.atom(a) is not None

    def keys(self, a: Address):
        atom = self.atom(a)
        return atom.predicate, atom.args

    def head_keys(self, rule_id: str, a: Address):
        return [(h.predicate, h.args) for h in rule_apply(self.rs.rule(rule_id), self.atom(a), a)]

    def is_const(self, key) -> bool:
        return isinstance(key, Constant)

    def blocks(self, team: Sequence[Address], rule_id: str, a: Address) -> bool:
        rule = self.rs.rule(rule_id)
        heads = rule_apply(rule, self.atom(a), a)
        return team_blocks(rule, heads, [self.atom(v) for v in team])

    def children(self, a: Address) -> List[Address]:
        atom = self.atom(a)
        return [a.child(r.id, i) for r in self.rs.rules if match(r.body, atom) is not None
                for i in range(1, r.head_size + 1)]


from .abstract import BOTTOM as BOTTOM_  # noqa: E402


def make_view(kind: str, rs: RuleSet, root: Atom):
    return {"abstract": AbstractView, "concrete": ConcreteView}[kind](rs, root)


# ---------------------------------------------------------------- path context

class PathContext:
    """An ultimately periodic path from ``root`` and the sets derived from it.

    ``stem`` and ``cycle`` are sequences of (rule id, head index) symbols; an
    empty cycle describes a finite path prefix.
    """

    def __init__(self, rs: RuleSet, root: Atom, stem: Sequence[Symbol], cycle: Sequence[Symbol] = (), view="abstract"):
        self.rs = rs
        self.root = root
        self.stem = tuple(stem)
        self.cycle = tuple(cycle)
        self.view = make_view(view, rs, root) if isinstance(view, str) else view
        self._nodes = [Address(root)]

    def step(self, n: int) -> Optional[Symbol]:
        if n < len(self.stem):
            return self.stem[n]
        if not self.cycle:
            return None
        return self.cycle[(n - len(self.stem)) % len(self.cycle)]

    def node(self, n: int) -> Address:
        while len(self._nodes) <= n:
            m = len(self._nodes) - 1
            sym = self.step(m)
            if sym is None:
                raise IndexError(f"path has only {m + 1} nodes")
            self._nodes.append(self._nodes[m].child(*sym))
        return self._nodes[n]

    def length(self) -> Optional[int]:
        return None if self.cycle else len(self.stem) + 1

    def index(self, u: Address) -> int:
        n = len(u)
        if self.node(n) != u:
            raise ValueError(f"{u} is not on the path")
        return n

    def on_path(self, a: Address) -> bool:
        try:
            return self.node(len(a)) == a
        except IndexError:
            return False

    def trigger_rule(self, n: int) -> Optional[str]:
        sym = self.step(n)
        return sym[0] if sym else None

    def in_p(self, a: Address) -> bool:
        """Membership in the path together with the siblings of its nodes."""
        if not a.symbols:
            return True
        n = len(a) - 1
        try:
            return self.node(n) == a.parent and self.trigger_rule(n) == a.last[0]
        except IndexError:
            return False

    def level(self, n: int) -> List[Address]:
        """Addresses of the path set at length ``n``."""
        if n == 0:
            return [self.node(0)]
        rid = self.trigger_rule(n - 1)
        k = self.rs.rule(rid).head_size
        return [self.node(n - 1).child(rid, i) for i in range(1, k + 1)]

    def bfr(self, n: int) -> List[Address]:
        out = []
        for m in range(n + 1):
            out.extend(self.level(m))
        return out

    def any_roots(self, n: int) -> List[Address]:
        """Minimal addresses of the set off the path set not below the node at ``n``."""
        out = []
        for m in range(n + 1):
            for x in self.level(m):
                if x == self.node(n):
                    continue
                on = m < n and x == self.node(m)
                for c in self.view.children(x):
                    if on and c.last[0] == self.trigger_rule(m):
                        continue
                    out.append(c)
        return out


# ---------------------------------------------------------------- explicit sets

def _path_index(fctx: PathContext, u: Address) -> int:
    return fctx.index(u)


def bfr_any(fctx: PathContext, u: Address, horizon: int) -> Tuple[Set[Address], Set[Address]]:
    if len(u) > horizon:
        raise HorizonTooSmall(f"|u| = {len(u)} exceeds horizon {horizon}")
    n = _path_index(fctx, u)
    bfr = set(fctx.bfr(n))
    anys: Set[Address] = set()
    todo = deque(fctx.any_roots(n))
    while todo:
        a = todo.popleft()
        if len(a) > horizon:
            continue
        anys.add(a)
        todo.extend(fctx.view.children(a))
    return bfr, anys


def condition_i(fctx: PathContext, u: Address) -> bool:
    n = _path_index(fctx, u)
    return _blocking_team_from(fctx, n, fctx.bfr(n)) is None


def _slot_ok(view, head, fp_iota, a) -> bool:
    pred, keys = view.keys(a)
    hp, hk = head
    return pred == hp and len(keys) == len(hk) and all(keys[j - 1] == hk[j - 1] for j in fp_iota)


def _blocking_team_from(fctx: PathContext, n: int, pool: Sequence[Address]) -> Optional[List[Address]]:
    rid = fctx.trigger_rule(n)
    if rid is None:
        return None
    from .rules import frontier_positions

    rule = fctx.rs.rule(rid)
    fp = frontier_positions(rule)
    u = fctx.node(n)
    heads = fctx.view.head_keys(rid, u)
    cands = [[a for a in pool if _slot_ok(fctx.view, heads[i], fp[i + 1], a)] for i in range(rule.head_size)]
    for team in itertools.product(*cands):
        if fctx.view.blocks(team, rid, u):
            return list(team)
    return None


def _new_nodes(fctx: PathContext, n_u: int, n_w: int) -> List[Address]:
    out = []
    for m in range(n_u + 1, n_w + 1):
        out.extend(fctx.level(m))
    return out


def harm_sets(fctx: PathContext, u: Address, v: Address, s: Optional[Address] = None, horizon: int = 8) -> Set[Address]:
    """Path nodes ``w`` beyond ``u`` whose trigger is blocked by a team built from ``v``.

    With ``s``: teams made of exactly ``v`` and ``s`` (in this order when the
    head has two atoms).  Without: teams using ``v`` in some slot and members
    created after ``u`` on the path set in the other slots.
    """
    from .rules import frontier_positions

    n_u = _path_index(fctx, u)
    out = set()
    for n_w in range(n_u, horizon + 1):
        rid = fctx.trigger_rule(n_w)
        if rid is None:
            break
        w = fctx.node(n_w)
        k = fctx.rs.rule(rid).head_size
        if s is not None:
            teams = [[v, s]] if k == 2 else ([[v], [s]] if k == 1 else [])
            if k > 2:
                teams = [list(t) for t in itertools.product([v, s], repeat=k) if v in t and s in t]
        else:
            new = _new_nodes(fctx, n_u, n_w)
            teams = []
            for slot in range(k):
                pools = [[v] if i == slot else new for i in range(k)]
                teams.extend(list(t) for t in itertools.product(*pools))
        if any(fctx.view.blocks(t, rid, w) for t in teams):
            out.add(w)
    return out


# ---------------------------------------------------------------- classes

class _Relative:
    """Isomorphism types of address tuples, up to renaming that fixes the terms of one node."""

    def __init__(self, view, u: Address):
        self.view = view
        pred, keys = view.keys(u)
        self.fixed: Dict[object, int] = {}
        for j, k in enumerate(keys, 1):
            self.fixed.setdefault(k, j)
        self._rows: Dict[Address, tuple] = {}

    def _row(self, a: Address) -> tuple:
        row = self._rows.get(a)
        if row is None:
            pred, keys = self.view.keys(a)
            tags = tuple(self.fixed.get(k) for k in keys)
            loose = frozenset(k for k in keys if k not in self.fixed)
            row = (pred, keys, tags, loose)
            self._rows[a] = row
        return row

    def key(self, addrs: Sequence[Address]) -> tuple:
        ren: Dict[object, int] = {}
        out = []
        for a in addrs:
            row = self._rows.get(a) or self._row(a)
            tag = []
            for k, t in zip(row[1], row[2]):
                if t is None:
                    tag.append(("a", ren.setdefault(k, len(ren))))
                else:
                    tag.append(("u", t))
            out.append((row[0], tuple(tag)))
        return tuple(out)

    def loose(self, a: Address) -> Set[object]:
        return self._row(a)[3]

    def connected(self, addrs: Sequence[Address]) -> bool:
        m = len(addrs)
        rows = self._rows
        terms = [(rows.get(a) or self._row(a))[3] for a in addrs]
        if m == 2:
            return addrs[0] == addrs[1] or not terms[0].isdisjoint(terms[1])
        seen, todo = {0}, [0]
        while todo:
            i = todo.pop()
            for j in range(m):
                if j not in seen and (addrs[i] == addrs[j] or terms[i] & terms[j]):
                    seen.add(j)
                    todo.append(j)
        return len(seen) == m


@dataclass
class OldRegion:
    """Representatives of the addresses created before, or independently of, a path node."""

    singles: List[Address]
    linked: Dict[int, List[Tuple[Address, ...]]]
    single_classes: Dict[tuple, List[Address]] = field(default_factory=dict)


def old_region(fctx: PathContext, n: int, kmax: int, limit: int = 20000) -> OldRegion:
    """Class representatives for the addresses of ``any`` and ``bfr`` at path node ``n``.

    Children of an address have classes determined by the class of the
    address, so a closure over classes from the minimal addresses is exhaustive.
    Tuples whose members share no term outside the node are covered by
    combining single representatives; linked tuples get their own closure.
    """
    view = fctx.view
    cache = view.__dict__.setdefault("_old_regions", {})
    ckey = (fctx.node(n), kmax)  # the address spells out every earlier path step
    hit = cache.get(ckey)
    if hit is not None:
        return hit
    rel = _Relative(view, fctx.node(n))
    fixed = fctx.bfr(n)
    roots = fctx.any_roots(n)

    singles: Dict[tuple, Address] = {}
    seen = set()
    todo = deque([(a, False) for a in fixed] + [(a, True) for a in roots])
    while todo:
        a, desc = todo.popleft()
        ck = rel.key([a])
        if (ck, desc) in seen:
            continue
        seen.add((ck, desc))
        singles.setdefault(ck, a)
        if desc:
            todo.extend((c, True) for c in view.children(a))
        if len(seen) > limit:
            raise RuntimeError("class closure exceeded its limit")

    linked: Dict[int, List[Tuple[Address, ...]]] = {}
    entries = [(a, False) for a in fixed] + [(a, True) for a in roots]
    for m in range(2, kmax + 1):
        linked[m] = _linked_closure(view, rel, entries, m, limit)
    region = OldRegion(list(singles.values()), linked, {k: [a] for k, a in singles.items()})
    cache[ckey] = region
    return region


def _linked_closure(view, rel: _Relative, entries, m: int, limit: int) -> List[Tuple[Address, ...]]:
    by_term: Dict[object, List[int]] = {}
    for idx, (a, _) in enumerate(entries):
        for t in rel.loose(a):
            by_term.setdefault(t, []).append(idx)
    adj: Dict[int, Set[int]] = {i: {i} for i in range(len(entries))}
    for ids in by_term.values():
        for i in ids:
            adj[i].update(ids)

    # connected multisets of entries of size m, then all orderings
    groups: Set[Tuple[int, ...]] = set()

    def grow(cur: List[int]):
        if len(cur) == m:
            groups.add(tuple(sorted(cur)))
            return
        nbrs = set()
        for i in cur:
            nbrs |= adj[i]
        for j in sorted(nbrs):
            if j >= cur[-1] or j in cur:
                grow(cur + [j])

    for i in range(len(entries)):
        grow([i])

    reps: Dict[tuple, Tuple[Address, ...]] = {}
    seen = set()
    todo = deque()

    def push(addrs, flags):
        if not rel.connected(addrs):
            return
        pattern = tuple(addrs.index(a) if flags[i] else -1 for i, a in enumerate(addrs))
        state = (rel.key(addrs), flags, pattern)
        if state in seen:
            return
        seen.add(state)
        reps.setdefault(state[0], addrs)
        if len(seen) > limit:
            raise RuntimeError("linked closure exceeded its limit")
        todo.append((addrs, flags))

    for g in sorted(groups):
        for perm in sorted(set(itertools.permutations(g))):
            push(tuple(entries[i][0] for i in perm), tuple(entries[i][1] for i in perm))
    while todo:
        addrs, flags = todo.popleft()
        done = set()
        for i, a in enumerate(addrs):
            if not flags[i] or a in done:
                continue
            done.add(a)
            group = [j for j in range(m) if addrs[j] == a and flags[j]]
            by_rule: Dict[str, List[Address]] = {}
            for c in view.children(a):
                by_rule.setdefault(c.last[0], []).append(c)
            for rk in by_rule.values():
                for r in range(1, len(group) + 1):
                    for sub in itertools.combinations(group, r):
                        for pick in itertools.product(rk, repeat=r):
                            nxt = list(addrs)
                            for j, c in zip(sub, pick):
                                nxt[j] = c
                            push(tuple(nxt), flags)
    return list(reps.values())


def equiv_classes(fctx: PathContext, u: Address, horizon: int):
    """Classes of single addresses and of pairs over ``any(u)`` and ``bfr(u)`` up to ``horizon``."""
    bfr, anys = bfr_any(fctx, u, horizon)
    rel = _Relative(fctx.view, u)
    pool = sorted(bfr | anys, key=Address.sort_key)
    singles: Dict[tuple, List[Address]] = {}
    for a in pool:
        singles.setdefault(rel.key([a]), []).append(a)
    pairs: Dict[tuple, List[Tuple[Address, Address]]] = {}
    for a in pool:
        for b in pool:
            pairs.setdefault(rel.key([a, b]), []).append((a, b))
    return singles, pairs


# ---------------------------------------------------------------- fragility

def _set_partitions(items: List[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _old_new_team(fctx: PathContext, n_w: int, old: OldRegion, new: Sequence[Address], need_old: bool = True) -> Optional[List[Address]]:
    """A blocking team for the path trigger at ``n_w`` with old members and members from ``new``."""
    from .rules import frontier_positions

    rid = fctx.trigger_rule(n_w)
    if rid is None:
        return None
    view = fctx.view
    rule = fctx.rs.rule(rid)
    k = rule.head_size
    fp = frontier_positions(rule)
    w = fctx.node(n_w)
    heads = view.head_keys(rid, w)

    def fits(slot, a):
        return _slot_ok(view, heads[slot], fp[slot + 1], a)

    old_fit = [[a for a in old.singles if fits(i, a)] for i in range(k)]
    new_fit = [[a for a in new if fits(i, a)] for i in range(k)]
    slots = list(range(k))
    for r in range(1 if need_old else 0, k + 1):
        for S in itertools.combinations(slots, r):
            others = [i for i in slots if i not in S]
            for part in _set_partitions(list(S)):
                choices = []
                ok = True
                for block in part:
                    if len(block) == 1:
                        opts = [(a,) for a in old_fit[block[0]]]
                    else:
                        opts = [t for t in old.linked.get(len(block), ())
                                if all(fits(sl, a) for sl, a in zip(block, t))]
                    if not opts:
                        ok = False
                        break
                    choices.append((block, opts))
                if not ok or any(not new_fit[i] for i in others):
                    continue
                for combo in itertools.product(*[opts for _, opts in choices]):
                    team: List[Optional[Address]] = [None] * k
                    for (block, _), t in zip(choices, combo):
                        for sl, a in zip(block, t):
                            team[sl] = a
                    for fill in itertools.product(*[new_fit[i] for i in others]):
                        for sl, a in zip(others, fill):
                            team[sl] = a
                        if view.blocks(team, rid, w):
                            return list(team)
    return None


def fragile(fctx: PathContext, u: Address, horizon: int) -> Set[Address]:
    if horizon < len(u):
        raise HorizonTooSmall(f"horizon {horizon} below |u| = {len(u)}")
    n_u = _path_index(fctx, u)
    old = old_region(fctx, n_u, fctx.rs.max_head_size)
    out = set()
    for n_w in range(n_u, horizon + 1):
        if fctx.trigger_rule(n_w) is None:
            break
        if _old_new_team(fctx, n_w, old, _new_nodes(fctx, n_u, n_w), need_old=False) is not None:
            out.add(fctx.node(n_w))
    return out


# ---------------------------------------------------------------- lassos

@dataclass(frozen=True)
class GraphEdge:
    src: Atom
    rule: str
    iota: int
    dst: Atom

    def to_json(self) -> dict:
        return {"from": str(self.src), "rule": self.rule, "iota": self.iota, "to": str(self.dst)}


@dataclass
class LassoWitness:
    critical_atom: Atom
    stem: List[GraphEdge]
    cycle: List[GraphEdge]
    certificate: List[dict] = field(default_factory=list)

    def symbols(self) -> Tuple[Tuple[Symbol, ...], Tuple[Symbol, ...]]:
        return tuple((e.rule, e.iota) for e in self.stem), tuple((e.rule, e.iota) for e in self.cycle)

    def to_json(self) -> dict:
        return {
            "atom": str(self.critical_atom),
            "stem": [e.to_json() for e in self.stem],
            "cycle": [e.to_json() for e in self.cycle],
            "certificate": self.certificate,
        }


@dataclass
class LassoCheck:
    ok: bool
    certificate: List[dict]
    failure: Optional[str] = None


def _bool_power_period(mat: List[List[bool]]) -> Tuple[int, int]:
    """Smallest t >= 1, p >= 1 with mat^(t+p) == mat^t."""
    a = len(mat)

    def mul(x, y):
        return tuple(tuple(any(x[i][l] and y[l][j] for l in range(a)) for j in range(a)) for i in range(a))

    m1 = tuple(tuple(r) for r in mat)
    seen = {}
    cur, k = m1, 1
    while cur not in seen:
        seen[cur] = k
        cur, k = mul(cur, m1), k + 1
    t = seen[cur]
    return t, k - t


def persistence_period(fctx: PathContext) -> Tuple[int, int]:
    """Transient and period, in cycles, of how path-node terms persist around the cycle."""
    s, c = len(fctx.stem), len(fctx.cycle)
    view = fctx.view
    _, ka = view.keys(fctx.node(s))
    _, kb = view.keys(fctx.node(s + c))
    mat = [[(not view.is_const(x)) and x == y for y in kb] for x in ka]
    return _bool_power_period(mat)


def check_lasso(fctx: PathContext, extra: int = 0) -> LassoCheck:
    """Check condition (i) and vanishing fragility increments on finite unrollings.

    Path nodes up to the stem plus ``T + P`` cycle unrollings are taken as
    ``u``; for each, the trigger of every path node in the ``P`` unrollings
    starting ``T + 1`` unrollings later (plus ``extra`` further unrollings)
    must not be blocked with help from old addresses.
    """
    s, c = len(fctx.stem), len(fctx.cycle)
    t, p = persistence_period(fctx)
    kmax = fctx.rs.max_head_size

    def unroll(n):
        return 0 if n < s else (n - s) // c

    def window(n):
        start = s + c * (unroll(n) + t + 1)
        return start, start + c * (p + extra)

    n_u_max = s + c * (t + p)
    last = max(window(n)[1] for n in range(n_u_max))
    cert = []
    cond_i = {}
    for n in range(last):
        team = _blocking_team_from(fctx, n, fctx.bfr(n))
        if team is not None:
            return LassoCheck(False, cert, f"condition (i) fails at {fctx.node(n)}: blocked by {[str(x) for x in team]}")
        cond_i[n] = True
    for n in range(n_u_max):
        old = old_region(fctx, n, kmax)
        lo, hi = window(n)
        inc = []
        for n_w in range(lo, hi):
            team = _old_new_team(fctx, n_w, old, _new_nodes(fctx, n, n_w))
            if team is not None:
                inc.append(str(fctx.node(n_w)))
                return LassoCheck(False, cert, f"fragility of {fctx.node(n)} grows: {inc[0]} blocked by {[str(x) for x in team]}")
        cert.append({"node": fctx.node(n).symbol_strings(), "conditionI": cond_i[n], "fragileIncrement": inc})
    return LassoCheck(True, cert)


@dataclass
class Bounds:
    max_stem: Optional[int] = None
    max_cycle: Optional[int] = None
    check_depth: Optional[int] = None
    max_candidates: int = 2000
    max_walks: int = 50000


@dataclass
class SearchResult:
    witness: Optional[LassoWitness]
    exhausted: bool
    covers_graph: bool
    candidates: int
    nodes: int
    max_stem: int
    max_cycle: int


def _graph_adj(graph: AbstractGraph) -> Dict[Atom, List[GraphEdge]]:
    adj: Dict[Atom, List[GraphEdge]] = {n: [] for n in graph.nodes}
    for (f, r, i), t in graph.edges.items():
        adj[f].append(GraphEdge(f, r, i, t))
    return adj


def _cyclic_core(graph: AbstractGraph) -> Set[Atom]:
    """Nodes from which some cycle is reachable."""
    g = nx.DiGraph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from((f, t) for (f, _, _), t in graph.edges.items())
    on_cycle = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(x, x) for x in comp):
            on_cycle |= comp
    reach = set(on_cycle)
    for x in on_cycle:
        reach |= nx.ancestors(g, x)
    return reach


class _Budget(Exception):
    pass


def search_witness(rs: RuleSet, omega: Atom, bounds: Optional[Bounds] = None) -> SearchResult:
    """Enumerate lassos in (stem length, cycle length, edge order) and return the first witness."""
    bounds = bounds or Bounds()
    graph = build_graph(rs, omega)
    adj = _graph_adj(graph)
    core = _cyclic_core(graph)
    n_nodes = len(graph.nodes)
    max_stem = n_nodes if bounds.max_stem is None else bounds.max_stem
    max_cycle = n_nodes if bounds.max_cycle is None else bounds.max_cycle
    covers = max_stem >= n_nodes and max_cycle >= n_nodes
    view = AbstractView(rs, canonical(omega))
    root = canonical(omega)
    cond_cache: Dict[Tuple[Symbol, ...], bool] = {}
    count = {"cand": 0, "walks": 0}

    def cond_ok(symbols: Tuple[Symbol, ...]) -> bool:
        # condition (i) at the last node, extended by the last symbol
        hit = cond_cache.get(symbols)
        if hit is None:
            ctx = PathContext(rs, root, symbols, (), view)
            hit = _blocking_team_from(ctx, len(symbols) - 1, ctx.bfr(len(symbols) - 1)) is None
            cond_cache[symbols] = hit
        return hit

    radj: Dict[Atom, Set[Atom]] = {n: set() for n in graph.nodes}
    for (f, _, _), t in graph.edges.items():
        radj[t].add(f)
    dist_cache: Dict[Atom, Dict[Atom, int]] = {}

    def dist_to(target: Atom) -> Dict[Atom, int]:
        if target not in dist_cache:
            dist, todo = {target: 0}, deque([target])
            while todo:
                x = todo.popleft()
                for y in radj[x]:
                    if y not in dist:
                        dist[y] = dist[x] + 1
                        todo.append(y)
            dist_cache[target] = dist
        return dist_cache[target]

    def walks(node: Atom, length: int, prefix: Tuple[GraphEdge, ...], target: Optional[Atom], syms0: Tuple[Symbol, ...]):
        if length == 0:
            if target is None or node == target:
                yield prefix
            return
        dist = dist_to(target) if target is not None else None
        for e in adj[node]:
            if e.dst not in core:
                continue
            if dist is not None and dist.get(e.dst, length) > length - 1:
                continue
            count["walks"] += 1
            if count["walks"] > bounds.max_walks:
                raise _Budget()
            syms = syms0 + tuple((x.rule, x.iota) for x in prefix) + ((e.rule, e.iota),)
            if not cond_ok(syms):
                continue
            yield from walks(e.dst, length - 1, prefix + (e,), target, syms0)

    exhausted = True
    try:
        stems = [()] if root in core else []
        for s in range(max_stem + 1):
            if s > 0:
                # extend the previous stems by one edge, keeping condition (i)
                longer = []
                for stem in stems:
                    end = stem[-1].dst if stem else root
                    longer.extend(stem + w for w in walks(end, 1, (), None, tuple((e.rule, e.iota) for e in stem)))
                stems = longer
            for c in range(1, max_cycle + 1):
                for stem in stems:
                    start = stem[-1].dst if stem else root
                    ssyms = tuple((e.rule, e.iota) for e in stem)
                    for cyc in walks(start, c, (), start, ssyms):
                        if stem and stem[-1] == cyc[-1]:
                            continue
                        if any(c % d == 0 and cyc == cyc[:d] * (c // d) for d in range(1, c)):
                            continue
                        count["cand"] += 1
                        if count["cand"] > bounds.max_candidates:
                            raise _Budget()
                        ctx = PathContext(rs, root, ssyms, tuple((e.rule, e.iota) for e in cyc), view)
                        res = check_lasso(ctx)
                        if res.ok:
                            w = LassoWitness(omega, list(stem), list(cyc), res.certificate)
                            return SearchResult(w, False, covers, count["cand"], n_nodes, max_stem, max_cycle)
    except _Budget:
        exhausted = False
    return SearchResult(None, exhausted, covers, count["cand"], n_nodes, max_stem, max_cycle)


def find_witness(rs: RuleSet, omega: Atom, bounds: Optional[Bounds] = None) -> Optional[LassoWitness]:
    return search_witness(rs, omega, bounds).witness


def _replay_edges(graph: AbstractGraph, start: Atom, edges: Sequence[GraphEdge]) -> Atom:
    node = start
    for e in edges:
        if e.src != node:
            raise MalformedWitness(f"edge {e.rule}{e.iota} starts at {e.src}, expected {node}")
        nxt = graph.step(node, e.rule, e.iota)
        if nxt is None or nxt != e.dst:
            raise MalformedWitness(f"no edge {e.rule}{e.iota} from {node} to {e.dst}")
        node = nxt
    return node


def check_witness(rs: RuleSet, w: LassoWitness, depth: int = 20) -> bool:
    """Replay the lasso on concrete atoms and re-verify both conditions up to ``depth``."""
    if not w.cycle:
        raise MalformedWitness("empty cycle")
    graph = build_graph(rs, w.critical_atom)
    mid = _replay_edges(graph, graph.root, w.stem)
    end = _replay_edges(graph, mid, w.cycle)
    if end != mid:
        raise MalformedWitness("cycle does not return to its start")
    stem, cycle = w.symbols()
    ctx = PathContext(rs, w.critical_atom, stem, cycle, view="concrete")
    s, c = len(stem), len(cycle)
    t, p = persistence_period(ctx)
    base = s + c * (2 * t + 2 * p + 1)
    extra = max(0, -(-(depth - base) // c))
    return check_lasso(ctx, extra=extra).ok


# ---------------------------------------------------------------- verdicts

@dataclass
class AtomResult:
    atom: Atom
    verdict: str
    witness: Optional[LassoWitness]
    search: SearchResult


@dataclass
class Verdict:
    kind: str
    witness: Optional[LassoWitness] = None
    bounds_used: dict = field(default_factory=dict)
    atoms: List[AtomResult] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"verdict": self.kind, "bounds": self.bounds_used}
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        out["atoms"] = [
            {
                "atom": str(r.atom),
                "verdict": r.verdict,
                "graphNodes": r.search.nodes,
                "candidates": r.search.candidates,
                "exhausted": r.search.exhausted,
            }
            for r in self.atoms
        ]
        return out


def decide_atom(rs: RuleSet, omega: Atom, bounds: Optional[Bounds] = None) -> AtomResult:
    bounds = bounds or Bounds()
    res = search_witness(rs, omega, bounds)
    if res.witness is not None:
        depth = bounds.check_depth or 0
        if check_witness(rs, res.witness, depth):
            return AtomResult(omega, "NonTerminating", res.witness, res)
        return AtomResult(omega, "Unknown", None, res)
    if res.exhausted and res.covers_graph:
        return AtomResult(omega, "Terminating", None, res)
    return AtomResult(omega, "Unknown", None, res)


def decide(rs: RuleSet, bounds: Optional[Bounds] = None) -> Verdict:
    bounds = bounds or Bounds()
    results = [decide_atom(rs, a, bounds) for a in enumerate_critical_atoms(rs)]
    used = {
        "maxStem": bounds.max_stem,
        "maxCycle": bounds.max_cycle,
        "checkDepth": bounds.check_depth,
        "maxCandidates": bounds.max_candidates,
    }
    for r in results:
        if r.verdict == "NonTerminating":
            return Verdict("NonTerminating", r.witness, used, results)
    if all(r.verdict == "Terminating" for r in results):
        return Verdict("Terminating", None, used, results)
    return Verdict("Unknown", None, used, results)
