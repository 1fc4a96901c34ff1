from pathlib import Path

import numpy as np
import pytest

from mpbvp import load_problem

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

# linear problems without eps: the regular corpus used by the split, oracle and residual checks
REGULAR_LINEAR = ["cauchy_exp", "two_point_scalar", "three_point_n2", "separated_n2", "periodic_n2",
                  "spectrum_diag", "spectrum_interior"]


def corpus_path(name):
    return CORPUS / f"{name}.json"


def corpus_problem(name):
    return load_problem(corpus_path(name)).bvp()


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
