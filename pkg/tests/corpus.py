"""Seeded random linear rule sets shared by the corpus-wide tests."""

import random

from artifact.rules import RuleSet, parse_ruleset

CORPUS_SIZE = 200


def random_ruleset_text(seed: int) -> str:
    rng = random.Random(seed)
    preds = [(name, rng.randint(1, 3)) for name in ["R", "S"][: rng.randint(1, 2)]]
    lines = []
    for n in range(rng.randint(1, 3)):
        pred, arity = rng.choice(preds)
        pool = ["x", "y", "w"]
        body = [rng.choice(pool[:arity]) for _ in range(arity)]
        frontier = sorted(set(body))
        exist = ["z", "v"][: rng.choice([0, 1, 1, 2])]
        heads = []
        for _ in range(rng.choice([1, 2, 2])):
            hp, ha = rng.choice(preds)
            heads.append(f"{hp}({','.join(rng.choice(frontier + exist) for _ in range(ha))})")
        used = [z for z in exist if any(z in h for h in heads)]
        ex = f"exists {' '.join(used)}. " if used else ""
        lines.append(f"rule r{n + 1}: {pred}({','.join(body)}) -> {ex}{', '.join(heads)}.")
    return "\n".join(lines) + "\n"


def random_ruleset(seed: int) -> RuleSet:
    return parse_ruleset(random_ruleset_text(seed))


def corpus():
    return [(seed, random_ruleset(seed)) for seed in range(CORPUS_SIZE)]
