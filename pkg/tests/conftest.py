from pathlib import Path

import pytest

from artifact.rules import parse_instance, parse_ruleset

DATA = Path(__file__).parent / "data"


def load_rules(name):
    return parse_ruleset((DATA / f"{name}.rules").read_text())


def load_facts(name, rs=None):
    return parse_instance((DATA / f"{name}.facts").read_text(), rs)


@pytest.fixture
def ex1():
    return load_rules("ex1")


@pytest.fixture
def ex2():
    return load_rules("ex2")
