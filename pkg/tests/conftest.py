from pathlib import Path

import numpy as np
import pytest

from hiercp.files import read_hierarchy, read_probs
from hiercp.probmodel import ProbabilityView

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def tree8():
    return read_hierarchy(DATA / "tree8.json")


@pytest.fixture(scope="session")
def tree8_view(tree8):
    probs = read_probs(DATA / "tree8_probs.csv", tree8)
    return ProbabilityView(tree8, probs[0])


def cls(h, *names):
    """Class ids for 1-based class names of the fixture."""
    return [h.class_of_leaf[h.node_of_name[str(n)]] for n in names]


def node(h, name):
    return h.node_of_name[name]


def dirichlet_view(h, rng, concentration=1.0):
    return ProbabilityView(h, rng.dirichlet(np.full(h.K, concentration)))


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"acceptance {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
