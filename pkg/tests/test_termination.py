import itertools

import pytest

from artifact.errors import HorizonTooSmall, MalformedWitness
from artifact.rules import Address, Atom, Constant, enumerate_critical_atoms, parse_atom, parse_ruleset
from artifact.termination import (
    Bounds,
    GraphEdge,
    LassoWitness,
    PathContext,
    _Relative,
    bfr_any,
    check_lasso,
    check_witness,
    condition_i,
    decide,
    decide_atom,
    equiv_classes,
    find_witness,
    fragile,
    harm_sets,
    persistence_period,
)
from corpus import random_ruleset

OMEGA2 = parse_atom("R(a,b,b)")
OMEGA1 = parse_atom("R(a0,a1)")
G2 = (("g", 2),)


def at(root, *syms):
    return Address(root, tuple((r, int(i)) for r, i in (s.split(":") for s in syms)))


def test_bfr_any_example2(ex2):
    ctx = PathContext(ex2, OMEGA2, (), G2, "concrete")
    bfr, anys = bfr_any(ctx, ctx.node(2), 4)
    assert bfr == {Address(OMEGA2), at(OMEGA2, "g:1"), at(OMEGA2, "g:2"), at(OMEGA2, "g:2", "g:1"), at(OMEGA2, "g:2", "g:2")}
    assert bfr_any(ctx, Address(OMEGA2), 4)[1] == set()
    assert at(OMEGA2, "d:1") in bfr_any(ctx, ctx.node(1), 4)[1]
    assert all(len(a) <= 4 and not ctx.node(2).is_prefix_of(a) for a in anys)
    with pytest.raises(HorizonTooSmall):
        bfr_any(ctx, ctx.node(5), 4)


def test_condition_i(ex1, ex2):
    ctx1 = PathContext(ex1, OMEGA1, (), (("r1", 1),))
    assert all(condition_i(ctx1, ctx1.node(n)) for n in range(6))
    bad = PathContext(ex2, OMEGA2, (("d", 1), ("g", 1)), (), "concrete")
    assert condition_i(bad, bad.node(0))
    assert not condition_i(bad, bad.node(1))
    assert condition_i(bad, bad.node(2))  # no trigger continues the finite path


def test_harm_sets(ex1, ex2):
    ctx = PathContext(ex2, OMEGA2, (), G2, "concrete")
    u, v = ctx.node(1), at(OMEGA2, "d:1")
    assert harm_sets(ctx, u, v, horizon=8) == {ctx.node(n) for n in range(2, 9)}
    assert harm_sets(ctx, u, v, ctx.node(1), horizon=8) == set()
    ctx1 = PathContext(ex1, OMEGA1, (), (("r1", 1),), "concrete")
    for n in range(3):
        u1 = ctx1.node(n)
        bfr, anys = bfr_any(ctx1, u1, 6)
        for v1 in sorted(anys | bfr, key=Address.sort_key)[:12]:
            assert harm_sets(ctx1, u1, v1, horizon=6) == set()
    rs = parse_ruleset("rule g: R(x,u,u) -> exists y. R(x,y,u), R(y,u,u).\nrule s: R(x,y,z) -> S(x).")
    ctx3 = PathContext(rs, OMEGA2, (), G2, "concrete")
    assert harm_sets(ctx3, ctx3.node(1), at(OMEGA2, "s:1"), horizon=5) == set()


def test_fragile(ex1, ex2):
    for view in ("concrete", "abstract"):
        ctx = PathContext(ex2, OMEGA2, (), G2, view)
        assert fragile(ctx, ctx.node(1), 8) == {ctx.node(n) for n in range(1, 9)}
        ctx1 = PathContext(ex1, OMEGA1, (), (("r1", 1),), view)
        assert all(fragile(ctx1, ctx1.node(n), 7) == set() for n in range(4))
    with pytest.raises(HorizonTooSmall):
        fragile(ctx, ctx.node(3), 2)


def test_fragile_matches_explicit_teams(ex2):
    # the class-representative computation agrees with brute force over explicit sets
    ctx = PathContext(ex2, OMEGA2, (("g", 2),), G2, "concrete")
    horizon = 5
    for n in range(3):
        u = ctx.node(n)
        bfr_u, anys = bfr_any(ctx, u, horizon)
        expect = set()
        for m in range(n, horizon + 1):
            w = ctx.node(m)
            pool = sorted(anys | set(ctx.bfr(m)), key=Address.sort_key)
            if any(ctx.view.blocks(t, "g", w) for t in itertools.product(pool, repeat=2)):
                expect.add(w)
        assert fragile(ctx, u, horizon) == expect


def test_equiv_classes(ex2):
    ctx = PathContext(ex2, OMEGA2, (), G2, "concrete")
    u = ctx.node(1)
    singles, pairs = equiv_classes(ctx, u, 4)
    bbb = [a for a in bfr_any(ctx, u, 4)[1] if str(ctx.view.atom(a)) == "R(b,b,b)"]
    assert len(bbb) > 1
    assert len({k for k, members in singles.items() if set(members) & set(bbb)}) == 1
    rel = _Relative(ctx.view, u)
    assert rel.key([u]) == rel.key([u])
    assert rel.key([Address(OMEGA2)]) != rel.key([at(OMEGA2, "d:1")])
    assert all(len(v) >= 1 for v in pairs.values())


def test_class_members_block_alike(ex2):
    # swapping a team member for another member of its class keeps the outcome
    ctx = PathContext(ex2, OMEGA2, (), G2, "concrete")
    for n in range(2):
        u = ctx.node(n)
        singles, _ = equiv_classes(ctx, u, 4)
        bfr_u, anys = bfr_any(ctx, u, 4)
        cls = {a: k for k, members in singles.items() for a in members}
        for m in range(n + 1, 4):
            w = ctx.node(m)
            for v, s in itertools.product(sorted(anys, key=Address.sort_key)[:10], ctx.bfr(m)):
                base = ctx.view.blocks([s, v], "g", w)
                for v2 in singles[cls[v]]:
                    if v2 in anys:
                        assert ctx.view.blocks([s, v2], "g", w) == base


def test_find_witness_examples(ex1, ex2):
    w = find_witness(ex1, parse_atom("R(c1,c2)"))
    assert w is not None and len(w.cycle) == 1
    assert w.cycle[0].src == w.cycle[0].dst
    assert all(e.rule == "r1" for e in w.stem + w.cycle)
    assert all(rec["conditionI"] and rec["fragileIncrement"] == [] for rec in w.certificate)
    assert find_witness(ex1, parse_atom("R(c1,c1)")) is None
    for a in enumerate_critical_atoms(ex2):
        assert find_witness(ex2, a) is None
    datalog = parse_ruleset("rule r: R(x,y) -> R(y,x), S(x).")
    assert all(find_witness(datalog, a) is None for a in enumerate_critical_atoms(datalog))


def test_rejected_lasso_names_a_node(ex2):
    ctx = PathContext(ex2, parse_atom("R(c1,c2,c2)"), (("g", 2),), G2)
    res = check_lasso(ctx)
    assert not res.ok and "grows" in res.failure
    ctx2 = PathContext(ex2, parse_atom("R(c1,c2,c2)"), (("d", 1),), (("g", 2),))
    res2 = check_lasso(ctx2)
    assert not res2.ok and "condition (i)" in res2.failure


def test_persistence_period(ex1, ex2):
    # a root of constants shares no nulls with later nodes
    assert persistence_period(PathContext(ex1, parse_atom("R(c1,c2)"), (), (("r1", 1),))) == (1, 1)
    assert persistence_period(PathContext(ex1, parse_atom("R(c1,c2)"), (("r1", 1), ("r1", 1)), (("r1", 1),))) == (2, 1)
    assert persistence_period(PathContext(ex2, parse_atom("R(c1,c2,c2)"), (("g", 2),), G2))[1] == 1


def test_check_witness(ex1, ex2):
    w = find_witness(ex1, parse_atom("R(c1,c2)"))
    assert check_witness(ex1, w, 10)
    assert check_witness(ex1, w, 20)
    root = parse_atom("R(c1,c2,c2)")
    bbb = parse_atom("R(c2,c2,c2)")
    fake = LassoWitness(root, [GraphEdge(root, "d", 1, bbb)], [GraphEdge(bbb, "g", 2, bbb)])
    with pytest.raises(MalformedWitness):
        check_witness(ex2, fake, 10)
    looping = LassoWitness(root, [GraphEdge(root, "d", 1, bbb)], [GraphEdge(bbb, "d", 1, bbb)])
    assert not check_witness(ex2, looping, 10)
    stray = LassoWitness(root, [GraphEdge(root, "r9", 1, root)], [GraphEdge(root, "g", 1, root)])
    with pytest.raises(MalformedWitness):
        check_witness(ex2, stray, 10)


def test_decide_examples(ex1, ex2):
    v1 = decide(ex1)
    assert v1.kind == "NonTerminating"
    assert check_witness(ex1, v1.witness, 20)
    js = v1.to_json()
    assert set(js["witness"]) == {"atom", "stem", "cycle", "certificate"}
    assert decide(ex2).kind == "Terminating"
    assert decide(parse_ruleset("")).kind == "Terminating"


def test_small_bounds_give_unknown(ex2, ex1):
    assert decide(ex2, Bounds(max_stem=1, max_cycle=1)).kind == "Unknown"
    assert decide(ex2, Bounds(max_candidates=0)).kind in ("Unknown", "Terminating")
    assert decide(ex1, Bounds(max_stem=0, max_cycle=1)).kind == "Unknown"


def _rename(atom: Atom, names) -> Atom:
    return Atom(atom.predicate, tuple(Constant(names[t.name]) for t in atom.args))


@pytest.mark.parametrize("seed", range(0, 40, 3))
def test_verdict_invariant_under_constant_renaming(seed):
    rs = random_ruleset(seed)
    for a in enumerate_critical_atoms(rs):
        names = {f"c{i}": f"k{9 - i}" for i in range(1, 5)}
        assert decide_atom(rs, a).verdict == decide_atom(rs, _rename(a, names)).verdict


@pytest.mark.parametrize("seed", range(1, 40, 3))
def test_bounds_are_monotone(seed):
    rs = random_ruleset(seed)
    verdicts = [decide(rs, Bounds(max_stem=s, max_cycle=c)).kind for s, c in [(0, 1), (1, 2), (2, 3), (None, None)]]
    first = next((i for i, v in enumerate(verdicts) if v != "Unknown"), None)
    if first is not None:
        assert all(v == verdicts[first] for v in verdicts[first:])


@pytest.mark.parametrize("seed", range(2, 60, 4))
def test_witnesses_replay_at_twice_depth(seed):
    rs = random_ruleset(seed)
    v = decide(rs)
    if v.witness is not None:
        assert check_witness(rs, v.witness, 40)
