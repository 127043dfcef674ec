"""Chase engine and all-instances restricted-chase termination for linear multi-head rules."""

from .abstract import AbstractGraph, AbstractLabeling, abstractize, blocks_abstract, build_graph, terms_equal
from .chase import LabeledForest, Trigger, expand, is_blocked, is_blocking_team, run_chase
from .oracle import cross_validate, explore
from .rules import Address, Atom, Instance, RuleSet, parse_atom, parse_instance, parse_ruleset
from .termination import Bounds, LassoWitness, Verdict, check_witness, decide, find_witness

__all__ = [
    "AbstractGraph", "AbstractLabeling", "Address", "Atom", "Bounds", "Instance", "LabeledForest",
    "LassoWitness", "RuleSet", "Trigger", "Verdict", "abstractize", "blocks_abstract", "build_graph",
    "check_witness", "cross_validate", "decide", "expand", "explore", "find_witness", "is_blocked",
    "is_blocking_team", "parse_atom", "parse_instance", "parse_ruleset", "run_chase", "terms_equal",
]
