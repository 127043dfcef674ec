"""Terms, atoms, linear multi-head rules, and their text formats.

Rule files::

    % comment
    rule g : R(x,u,u) -> exists y. R(x,y,u), R(y,u,u).

Instance files hold one ground fact per line, e.g. ``R(a,b,b).``
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import NonLinearBody, RuleSyntaxError, UnknownPredicateArityMismatch


@dataclass(frozen=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Null:
    """A labeled null: the value invented for ``var`` when ``rule`` fired at ``birth``."""

    var: str
    birth: "Address"
    rule: str
    _hash: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.var, self.birth, self.rule)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return f"_{self.var}^{self.rule}@{self.birth}"


Term = Union[Constant, Null]


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: Tuple
    _hash: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.predicate, self.args)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def arity(self) -> int:
        return len(self.args)

    def terms(self) -> set:
        return set(self.args)

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(a) for a in self.args)})"


Symbol = Tuple[str, int]


@dataclass(frozen=True)
class Address:
    """A fact of the instance followed by a word of (rule id, head index) symbols."""

    root: Atom
    symbols: Tuple[Symbol, ...] = ()
    _hash: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.root, self.symbols)))

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.symbols)

    def child(self, rule: str, iota: int) -> "Address":
        return Address(self.root, self.symbols + ((rule, iota),))

    def extend(self, symbols: Sequence[Symbol]) -> "Address":
        return Address(self.root, self.symbols + tuple(symbols))

    @property
    def parent(self) -> Optional["Address"]:
        if not self.symbols:
            return None
        return Address(self.root, self.symbols[:-1])

    @property
    def last(self) -> Optional[Symbol]:
        return self.symbols[-1] if self.symbols else None

    def is_prefix_of(self, other: "Address") -> bool:
        n = len(self.symbols)
        return self.root == other.root and other.symbols[:n] == self.symbols

    def sort_key(self):
        return (len(self.symbols), str(self.root), self.symbols)

    def symbol_strings(self) -> List[str]:
        return [f"{r}:{i}" for r, i in self.symbols]

    def __str__(self) -> str:
        return str(self.root) + "".join(f"/{r}:{i}" for r, i in self.symbols)


@dataclass(frozen=True)
class Rule:
    id: str
    body: Atom
    head: Tuple[Atom, ...]
    existential: FrozenSet[str]
    frontier: FrozenSet[str]

    @property
    def head_size(self) -> int:
        return len(self.head)

    def __str__(self) -> str:
        return format_rule(self)


@dataclass(frozen=True)
class RuleSet:
    rules: Tuple[Rule, ...]
    signature: Tuple[Tuple[str, int], ...]

    @property
    def max_arity(self) -> int:
        return max((a for _, a in self.signature), default=0)

    @property
    def max_head_size(self) -> int:
        return max((r.head_size for r in self.rules), default=1)

    def arity(self, predicate: str) -> Optional[int]:
        return dict(self.signature).get(predicate)

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def rule_index(self, rule_id: str) -> int:
        for n, r in enumerate(self.rules):
            if r.id == rule_id:
                return n
        raise KeyError(rule_id)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class Instance:
    facts: Tuple[Atom, ...]

    def __iter__(self):
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)


def match(pattern: Atom, atom: Atom) -> Optional[Dict[str, object]]:
    """The unique homomorphism from a single-atom pattern into ``atom``, if any."""
    if pattern.predicate != atom.predicate or pattern.arity != atom.arity:
        return None
    subst: Dict[str, object] = {}
    for var, term in zip(pattern.args, atom.args):
        bound = subst.setdefault(var.name, term)
        if bound != term:
            return None
    return subst


def frontier_positions(rule: Rule) -> Dict[int, FrozenSet[int]]:
    """Map each head index to the 1-based positions holding frontier variables."""
    return {
        iota: frozenset(j for j, v in enumerate(h.args, 1) if v.name in rule.frontier)
        for iota, h in enumerate(rule.head, 1)
    }


def _partitions(k: int) -> Iterator[List[int]]:
    # restricted growth strings in lexicographic order
    def grow(prefix: List[int], top: int):
        if len(prefix) == k:
            yield list(prefix)
            return
        for b in range(top + 2):
            prefix.append(b)
            yield from grow(prefix, max(top, b))
            prefix.pop()

    if k == 0:
        yield []
        return
    yield from grow([0], 0)


def enumerate_critical_atoms(rs: RuleSet) -> List[Atom]:
    """One ground atom per equality pattern of each predicate, over constants c1..ck."""
    out = []
    for pred, arity in rs.signature:
        for blocks in _partitions(arity):
            out.append(Atom(pred, tuple(Constant(f"c{b + 1}") for b in blocks)))
    return out


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>%[^\n]*)|(?P<arrow>->)"
    r"|(?P<id>[A-Za-z0-9_][A-Za-z0-9_']*)|(?P<punct>[(),.:])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("id", "punct", "arrow"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise RuleSyntaxError(message, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text:
            self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.take()

    def ident(self, what: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "id":
            self.fail(f"expected {what}, found {tok.text or 'end of input'!r}")
        return self.take()

    def atom(self, make_term) -> Tuple[Atom, _Tok]:
        pred = self.ident("predicate name")
        self.expect("(")
        args = [make_term(self.ident("term").text)]
        while self.peek().text == ",":
            self.take()
            args.append(make_term(self.ident("term").text))
        self.expect(")")
        return Atom(pred.text, tuple(args)), pred

    def atom_list(self, make_term) -> List[Tuple[Atom, _Tok]]:
        atoms = [self.atom(make_term)]
        while self.peek().text == ",":
            self.take()
            atoms.append(self.atom(make_term))
        return atoms


def _note_arity(sig: Dict[str, int], atom: Atom, tok: _Tok) -> None:
    known = sig.setdefault(atom.predicate, atom.arity)
    if known != atom.arity:
        raise UnknownPredicateArityMismatch(
            f"{tok.line}:{tok.col}: predicate {atom.predicate} used with arity "
            f"{atom.arity}, previously {known}"
        )


def parse_ruleset(text: str) -> RuleSet:
    p = _Parser(text)
    rules: List[Rule] = []
    sig: Dict[str, int] = {}
    seen = set()
    while p.peek().kind != "eof":
        kw = p.ident("'rule'")
        if kw.text != "rule":
            p.fail("expected 'rule'", kw)
        rid = p.ident("rule id")
        if rid.text in seen:
            p.fail(f"duplicate rule id {rid.text}", rid)
        seen.add(rid.text)
        p.expect(":")
        if p.peek().kind == "arrow":
            raise NonLinearBody(rid.text)
        body = p.atom_list(Variable)
        if len(body) != 1:
            raise NonLinearBody(rid.text)
        body_atom, body_tok = body[0]
        if p.peek().kind != "arrow":
            p.fail("expected '->'")
        p.take()
        existential: List[str] = []
        if p.peek().text == "exists" and p.toks[p.i + 1].kind == "id":
            p.take()
            while p.peek().kind == "id":
                existential.append(p.take().text)
            p.expect(".")
        head = p.atom_list(Variable)
        p.expect(".")

        body_vars = {v.name for v in body_atom.args}
        head_vars = {v.name for a, _ in head for v in a.args}
        for z in existential:
            if z in body_vars:
                p.fail(f"existential variable {z} occurs in the body", rid)
        for a, tok in head:
            for v in a.args:
                if v.name not in body_vars and v.name not in existential:
                    p.fail(f"head variable {v.name} is neither frontier nor existential", tok)
        _note_arity(sig, body_atom, body_tok)
        for a, tok in head:
            _note_arity(sig, a, tok)
        rules.append(
            Rule(
                id=rid.text,
                body=body_atom,
                head=tuple(a for a, _ in head),
                existential=frozenset(z for z in existential if z in head_vars),
                frontier=frozenset(body_vars & head_vars),
            )
        )
    return RuleSet(tuple(rules), tuple(sig.items()))


def parse_instance(text: str, rs: Optional[RuleSet] = None) -> Instance:
    p = _Parser(text)
    facts: List[Atom] = []
    sig: Dict[str, int] = dict(rs.signature) if rs is not None else {}
    while p.peek().kind != "eof":
        atom, tok = p.atom(Constant)
        _note_arity(sig, atom, tok)
        if p.peek().text == ".":
            p.take()
        if atom not in facts:
            facts.append(atom)
    return Instance(tuple(facts))


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    atom, _ = p.atom(Constant)
    if p.peek().text == ".":
        p.take()
    if p.peek().kind != "eof":
        p.fail("trailing input after atom")
    return atom


def format_rule(rule: Rule) -> str:
    ex = ""
    if rule.existential:
        order = []
        for a in rule.head:
            for v in a.args:
                if v.name in rule.existential and v.name not in order:
                    order.append(v.name)
        ex = "exists " + " ".join(order) + ". "
    head = ", ".join(str(a) for a in rule.head)
    return f"rule {rule.id}: {rule.body} -> {ex}{head}."


def format_ruleset(rs: RuleSet) -> str:
    return "".join(format_rule(r) + "\n" for r in rs.rules)
