"""End-to-end acceptance checks.  Each test prints one PASS/FAIL line."""

import itertools
import os
import random
import subprocess
import sys
import time

import pytest

import test_gadgets as gadgets
from artifact.abstract import abstractize, blocks_abstract, build_graph, canonical, terms_equal, unfold
from artifact.chase import LabeledForest, Trigger, expand, is_blocking_team, slot_candidates
from artifact.oracle import ExploreBounds, cross_validate, explore
from artifact.rules import Address, Instance, enumerate_critical_atoms, parse_atom
from artifact.termination import check_witness, decide
from conftest import DATA
from corpus import CORPUS_SIZE, corpus, random_ruleset_text
from homs import brute_force_blocks

MAX_DEPTH = 5
NODE_CAP = 300  # forests are cut at the largest depth <= MAX_DEPTH under this size
TRIGGER_CAP = 30
TEAM_CAP = 60
GATE_BRANCH = 2000


@pytest.fixture
def report(capsys):
    def _report(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
        return ok
    return _report


def _forest(rs, omega):
    f = expand(Instance((omega,)), rs, 0)
    for d in range(1, MAX_DEPTH + 1):
        g = expand(Instance((omega,)), rs, d)
        if len(g) > NODE_CAP:
            break
        f = g
    return f


def _teams(rng, f, trig):
    rule = f.rs.rule(trig.rule)
    slots = slot_candidates(rule, f.head_images(trig), f.items())
    teams = list(itertools.islice(itertools.product(*slots), TEAM_CAP))
    addrs = f.addresses()
    teams += [tuple(rng.choice(addrs) for _ in range(rule.head_size)) for _ in range(TEAM_CAP // 3)]
    return teams


def test_nonterminating_example(ex1, report):
    t0 = time.time()
    v = decide(ex1)
    witness_ok = v.kind == "NonTerminating" and check_witness(ex1, v.witness, 20)
    res = explore(Instance((parse_atom("R(a0,a1)"),)), ex1)
    loop = res.trace["loop"] if res.trace else []
    # the fair loop fires r1 on the newest atom, then r2 on that same atom once it has a successor
    r1_at = {s["address"] for s in loop if s["rule"] == "r1"}
    interleaved = any(s["rule"] == "r2" and s["address"] in r1_at for s in loop)
    dt = time.time() - t0
    ok = witness_ok and res.status == "InfinitePattern" and interleaved and dt < 5
    assert report("nonterminating-example", ok, f"verdict={v.kind} oracle={res.status} {dt:.2f}s")


def test_terminating_example(ex2, report):
    t0 = time.time()
    v = decide(ex2)
    atoms = enumerate_critical_atoms(ex2)
    statuses = [explore(Instance((a,)), ex2, ExploreBounds(max_len=12)).status for a in atoms]
    omega = parse_atom("R(a,b,b)")
    labels_ok = True
    for n in range(7):
        g = LabeledForest.of_instance(ex2, Instance((omega,)))
        addr = Address(omega)
        for sym in [("g", 2)] * n + [("d", 1)]:
            g = g.apply(Trigger(sym[0], addr))
            addr = addr.child(*sym)
        labels_ok &= str(g.adr(addr)) == "R(b,b,b)"
    dt = time.time() - t0
    ok = v.kind == "Terminating" and len(atoms) == 5 and set(statuses) == {"AllTerminate"} and labels_ok and dt < 30
    assert report("terminating-example", ok, f"verdict={v.kind} oracle={statuses} {dt:.2f}s")


def test_blocking_semantics_corpus(report):
    rng = random.Random(0)
    pairs = bad_hom = bad_abs = 0
    for seed, rs in corpus():
        for omega in enumerate_critical_atoms(rs)[:3]:
            f = _forest(rs, omega)
            lab = abstractize(f)
            for trig in f.triggers()[:TRIGGER_CAP]:
                for team in _teams(rng, f, trig):
                    concrete = is_blocking_team(f, team, trig)
                    bad_hom += concrete != brute_force_blocks(rs, f, team, trig)
                    bad_abs += concrete != blocks_abstract(lab, team, trig)
                    pairs += 1
    ok = pairs > 10000 and bad_hom == 0 and bad_abs == 0
    assert report("blocking-semantics", ok, f"pairs={pairs} hom-mismatch={bad_hom} abstract-mismatch={bad_abs}")


def test_abstract_graph_consistency_corpus(report):
    forests = bad = 0
    for seed, rs in corpus():
        for omega in enumerate_critical_atoms(rs)[:3]:
            f = _forest(rs, omega)
            lab = abstractize(f)
            depth = max(len(a) for a in f)
            words = unfold(build_graph(rs, omega), depth)
            addrs = f.addresses()
            good = set(words) == {a.symbols for a in addrs}
            good &= all(words[a.symbols] == canonical(lab.label(a)) for a in addrs)
            # term keys and concrete terms must be in bijection, which makes terms_equal exact
            key_of, term_of = {}, {}
            for a in addrs:
                for i, t in enumerate(f.adr(a).args, 1):
                    k = lab.term_key(a, i)
                    good &= key_of.setdefault(t, k) == k and term_of.setdefault(k, t) == t
            head = addrs[:25]
            for u, w in itertools.product(head, repeat=2):
                for i, j in itertools.product(range(1, f.adr(u).arity + 1), range(1, f.adr(w).arity + 1)):
                    good &= terms_equal(lab, u, i, w, j) == (f.adr(u).args[i - 1] == f.adr(w).args[j - 1])
            forests += 1
            bad += not good
    assert report("abstract-graph-consistency", forests > CORPUS_SIZE and bad == 0, f"forests={forests} mismatches={bad}")


def test_gadget_suites(ex2, report):
    ok = True
    for check in (gadgets.test_prettier_parents_prettier_children, gadgets.test_better_map_preserves_blocking):
        try:
            check(ex2)
        except AssertionError:
            ok = False
    assert report("gadget-suites", ok, f"depth={gadgets.DEPTH}")


def test_cross_validation_gate(ex1, ex2, report):
    eb = ExploreBounds(max_branch=GATE_BRANCH)
    failures = []
    n = 0
    for name, rs in [("ex1", ex1), ("ex2", ex2)] + [(f"seed {s}", rs) for s, rs in corpus()]:
        rep = cross_validate(rs, None, eb)
        n += len(rep.atoms)
        if not rep.agree:
            text = random_ruleset_text(int(name.split()[1])) if name.startswith("seed") else (DATA / f"{name}.rules").read_text()
            failures.append(f"{name}: {[a.to_json() for a in rep.atoms if not a.agree]}\n{text}")
    report("cross-validation-gate", not failures, f"atoms={n} disagreements={len(failures)}")
    assert not failures, "\n".join(failures)


def _cli(args, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    return subprocess.run([sys.executable, "-m", "artifact"] + args, capture_output=True, env=env, check=False)


def test_cli_determinism(report):
    r1, r2 = str(DATA / "ex1.rules"), str(DATA / "ex2.rules")
    f1, f2 = str(DATA / "ex1.facts"), str(DATA / "ex2.facts")
    commands = [
        ["run", "--rules", r2, "--instance", f2, "--max-steps", "20"],
        ["run", "--rules", r1, "--instance", f1, "--max-steps", "20", "--strategy", "random", "--seed", "7"],
        ["run", "--rules", r1, "--instance", f1, "--mode", "oblivious", "--max-steps", "10", "--format", "dot"],
        ["decide", "--rules", r1],
        ["decide", "--rules", r2],
        ["oracle", "--rules", r1, "--instance", f1],
        ["oracle", "--rules", r2],
        ["graph", "--rules", r2, "--format", "json"],
        ["graph", "--rules", r1],
    ]
    diff = []
    for cmd in commands:
        a, b = _cli(cmd, 1), _cli(cmd, 2)
        if (a.stdout, a.returncode) != (b.stdout, b.returncode) or not a.stdout:
            diff.append(cmd[0])
    assert report("cli-determinism", not diff, f"commands={len(commands)} differing={diff}")
