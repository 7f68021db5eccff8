import json
from pathlib import Path

import numpy as np
import pytest

from privfill.rewriter import Document, StubModel

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name):
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))


@pytest.fixture
def constant_model():
    return StubModel({"vocab": ["S"], "eos": "</s>", "default": {"emit": "S"}})


@pytest.fixture
def no_eos_model():
    # three equally likely words and no end-of-sequence token
    return StubModel({"vocab": ["x", "y", "z"], "default": {"uniform": True}})


@pytest.fixture
def four_sentences():
    return Document("d4", "The soup was cold. The waiter was rude. We left early. Never again.")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA

    results = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance.py::test_acceptance[" in rep.nodeid and rep.when == "call":
                results[rep.nodeid.split("[")[1].rstrip("]")] = "PASS" if status == "passed" else "FAIL"
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(f"{key} {CRITERIA[key]}: {results[key]}")
