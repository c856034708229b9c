import sys

import numpy as np
import pytest

from eedi.domain import Axis, BeliefGrid, SearchDomain


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_square():
    return SearchDomain([1.0, 1.0], 41)


@pytest.fixture
def unit_line():
    return SearchDomain([1.0], 101)


def line_grid(count=101, lo=0.0, hi=1.0):
    return BeliefGrid.uniform([Axis("x", lo, hi, count)])


def square_grid(count=21, L=1.0):
    return BeliefGrid.uniform([Axis("x", 0.0, L, count), Axis("y", 0.0, L, count)])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in results:
            ok, detail, secs = results[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({secs:.0f} s) {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
