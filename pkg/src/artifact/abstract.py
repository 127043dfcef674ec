"""Abstract atoms, correct labelings, the abstract transition graph, and term-equality decoding.

An abstract atom replaces nulls by small integer indices.  Along a rule
application, frontier terms keep their index and every existential takes the
smallest index absent from the parent label, so a term persists from parent
to child exactly when its index does.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .chase import LabeledForest, Trigger
from .errors import UnlabeledAddress
from .rules import Address, Atom, Constant, Rule, RuleSet, frontier_positions, match


@dataclass(frozen=True, order=True)
class Index:
    n: int

    def __str__(self) -> str:
        return f"#{self.n}"


class _Bottom:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "BOTTOM"

    __str__ = __repr__


BOTTOM = _Bottom()
Label = Union[Atom, _Bottom]


def index_budget(rs: RuleSet) -> int:
    """Thrice the maximal arity, widened only when a rule has more existentials than that allows."""
    need = max((len(r.existential) for r in rs.rules), default=0)
    return max(3 * rs.max_arity, rs.max_arity + need)


def abs_apply(rule: Rule, label: Atom, budget: Optional[int] = None) -> List[Atom]:
    subst = match(rule.body, label)
    if subst is None:
        raise ValueError(f"{rule.id} does not apply to {label}")
    used = {t.n for t in label.args if isinstance(t, Index)}
    nxt = 1
    for h in rule.head:
        for v in h.args:
            if v.name in subst:
                continue
            while nxt in used:
                nxt += 1
            subst[v.name] = Index(nxt)
            used.add(nxt)
    if budget is not None and nxt > budget:
        raise ValueError(f"index {nxt} exceeds the budget {budget}")
    return [Atom(h.predicate, tuple(subst[v.name] for v in h.args)) for h in rule.head]


def canonical(atom: Atom) -> Atom:
    """Rename indices to 1, 2, ... in order of first occurrence."""
    ren: Dict[Index, Index] = {}
    args = []
    for t in atom.args:
        if isinstance(t, Index):
            t = ren.setdefault(t, Index(len(ren) + 1))
        args.append(t)
    return Atom(atom.predicate, tuple(args))


class AbstractLabeling:
    """Map from addresses to abstract atoms (or BOTTOM).

    A closed labeling covers a finite forest; an open one labels the whole
    tree under its roots on demand.
    """

    def __init__(self, rs: RuleSet, labels: Dict[Address, Atom], closed: bool = True):
        self.rs = rs
        self.budget = index_budget(rs)
        self._labels = dict(labels)
        self.closed = closed
        self._keys: Dict[Tuple[Address, int], tuple] = {}

    @classmethod
    def open(cls, rs: RuleSet, root: Atom) -> "AbstractLabeling":
        return cls(rs, {Address(root): root}, closed=False)

    def label(self, address: Address) -> Label:
        lab = self._labels.get(address)
        if lab is not None:
            return lab
        if self.closed or address.parent is None:
            return BOTTOM
        parent = self.label(address.parent)
        if parent is BOTTOM:
            return BOTTOM
        rid, iota = address.last
        rule = self.rs.rule(rid)
        if not 1 <= iota <= rule.head_size or match(rule.body, parent) is None:
            return BOTTOM
        kids = abs_apply(rule, parent, self.budget)
        for i, k in enumerate(kids, 1):
            self._labels[address.parent.child(rid, i)] = k
        return kids[iota - 1]

    def labeled(self, address: Address) -> Atom:
        lab = self.label(address)
        if lab is BOTTOM:
            raise UnlabeledAddress(str(address))
        return lab

    def addresses(self) -> List[Address]:
        return sorted(self._labels, key=Address.sort_key)

    def term_key(self, address: Address, i: int) -> tuple:
        """Identity of the term at position ``i`` (1-based) of ``address``.

        Constants are their own identity.  An index is followed upwards while
        the parent label still holds it (the ancestor relation); the topmost
        carrier and its siblings under the same trigger share the term (the
        sibling relation), and two positions hold the same null iff they meet
        at such a sibling pair.
        """
        key = self._keys.get((address, i))
        if key is not None:
            return key
        t = self.labeled(address).args[i - 1]
        if isinstance(t, Constant):
            key = ("c", t.name)
        else:
            x = address
            while x.parent is not None and t in self.labeled(x.parent).args:
                x = x.parent
            if x.parent is None:
                raise ValueError(f"index {t} at a root label")
            key = ("n", x.parent, x.last[0], t.n)
        self._keys[(address, i)] = key
        return key

    def atom_keys(self, address: Address) -> Tuple[str, tuple]:
        lab = self.labeled(address)
        return lab.predicate, tuple(self.term_key(address, i) for i in range(1, lab.arity + 1))

    def head_keys(self, rule: Rule, address: Address) -> List[Tuple[str, tuple]]:
        """Predicate and term identities of the head atoms of ``rule`` fired at ``address``."""
        lab = self.labeled(address)
        out = []
        for h in abs_apply(rule, lab, self.budget):
            keys = []
            for t in h.args:
                if isinstance(t, Constant):
                    keys.append(("c", t.name))
                elif t in lab.args:
                    keys.append(self.term_key(address, lab.args.index(t) + 1))
                else:
                    keys.append(("n", address, rule.id, t.n))
            out.append((h.predicate, tuple(keys)))
        return out


def abstractize(forest: LabeledForest) -> AbstractLabeling:
    rs = forest.rs
    budget = index_budget(rs)
    labels: Dict[Address, Atom] = {}
    for a in forest.addresses():
        if a.parent is None:
            labels[a] = a.root
            continue
        rid, iota = a.last
        labels[a] = abs_apply(rs.rule(rid), labels[a.parent], budget)[iota - 1]
    return AbstractLabeling(rs, labels, closed=True)


def terms_equal(lab: AbstractLabeling, u: Address, i: int, w: Address, j: int) -> bool:
    return lab.term_key(u, i) == lab.term_key(w, j)


def keys_block(rule: Rule, heads: Sequence[Tuple[str, tuple]], team: Sequence[Tuple[str, tuple]]) -> bool:
    """Blocking conditions stated over term identities."""
    if len(heads) != len(team):
        return False
    fp = frontier_positions(rule)
    for iota, ((hp, hk), (tp, tk)) in enumerate(zip(heads, team), 1):
        if hp != tp or len(hk) != len(tk):
            return False
        if any(hk[j - 1] != tk[j - 1] for j in fp[iota]):
            return False
    flat_h = [k for _, hk in heads for k in hk]
    flat_t = [k for _, tk in team for k in tk]
    for a in range(len(flat_h)):
        for b in range(a + 1, len(flat_h)):
            if flat_h[a] == flat_h[b] and flat_t[a] != flat_t[b]:
                return False
    return True


def blocks_abstract(lab: AbstractLabeling, team: Sequence[Address], trig: Trigger) -> bool:
    rule = lab.rs.rule(trig.rule)
    if len(team) != rule.head_size:
        raise ValueError(f"team size {len(team)} != head size {rule.head_size}")
    heads = lab.head_keys(rule, trig.address)
    return keys_block(rule, heads, [lab.atom_keys(v) for v in team])


# ---------------------------------------------------------------- graph

@dataclass
class AbstractGraph:
    root: Atom
    nodes: List[Atom]
    edges: Dict[Tuple[Atom, str, int], Atom]

    def successors(self, node: Atom) -> List[Tuple[str, int, Atom]]:
        return [(r, i, to) for (frm, r, i), to in self.edges.items() if frm == node]

    def step(self, node: Atom, rule: str, iota: int) -> Optional[Atom]:
        return self.edges.get((node, rule, iota))

    def to_json(self) -> dict:
        return {
            "root": str(self.root),
            "nodes": [str(n) for n in self.nodes],
            "edges": [
                {"from": str(f), "rule": r, "iota": i, "to": str(t)}
                for (f, r, i), t in self.edges.items()
            ],
        }

    def to_dot(self) -> str:
        ids = {n: f"s{k}" for k, n in enumerate(self.nodes)}
        lines = ["digraph abstract {", "  node [shape=box];"]
        for n in self.nodes:
            shape = ", peripheries=2" if n == self.root else ""
            lines.append(f'  {ids[n]} [label="{n}"{shape}];')
        for (f, r, i), t in self.edges.items():
            lines.append(f'  {ids[f]} -> {ids[t]} [label="{r}{i}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_graph(rs: RuleSet, omega: Atom) -> AbstractGraph:
    budget = index_budget(rs)
    root = canonical(omega)
    nodes = [root]
    seen = {root}
    edges: Dict[Tuple[Atom, str, int], Atom] = {}
    todo = deque([root])
    while todo:
        node = todo.popleft()
        for rule in rs.rules:
            if match(rule.body, node) is None:
                continue
            for i, kid in enumerate(abs_apply(rule, node, budget), 1):
                kid = canonical(kid)
                edges[(node, rule.id, i)] = kid
                if kid not in seen:
                    seen.add(kid)
                    nodes.append(kid)
                    todo.append(kid)
    return AbstractGraph(root, nodes, edges)


def unfold(graph: AbstractGraph, depth: int) -> Dict[Tuple, Atom]:
    """Tree of symbol words (up to ``depth``) reachable from the root, with node labels."""
    out = {(): graph.root}
    layer = [()]
    for _ in range(depth):
        nxt = []
        for w in layer:
            for r, i, to in graph.successors(out[w]):
                out[w + ((r, i),)] = to
                nxt.append(w + ((r, i),))
        layer = nxt
    return out
