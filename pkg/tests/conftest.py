import json
from pathlib import Path

import pytest

from varinverse.symexpr import parse
from varinverse.systems import SecondOrderSystem, system_from_json

CORPUS = Path(__file__).resolve().parents[1] / "src" / "varinverse" / "corpus"


def corpus_doc(name):
    return json.loads((CORPUS / name).read_text())


def matrix(rows, env):
    return [[parse(e, env) for e in row] for row in rows]


@pytest.fixture
def dissipative():
    return system_from_json(corpus_doc("dissipative.json"))


@pytest.fixture
def magnetic():
    return system_from_json(corpus_doc("magnetic.json"))


@pytest.fixture
def magnetic_h(magnetic):
    return matrix(corpus_doc("magnetic_multiplier.json")["entries"], magnetic.env)


@pytest.fixture
def douglas():
    return SecondOrderSystem.from_strings(["x", "y"], {"x": "-dy", "y": "-y"})


@pytest.fixture
def harmonic():
    return SecondOrderSystem.from_strings(["q"], {"q": "-q"})


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.summary_lines():
            terminalreporter.write_line(line)
