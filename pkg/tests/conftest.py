import os

import numpy as np
import pytest

from treehjb import ControlGrid, TimeGrid, build_tree, PruneConfig
from treehjb.problems import make_test1
from treehjb.stepper import ExplicitEuler

_VERDICTS = {}


def pytest_collection_modifyitems(config, items):
    if os.environ.get("TREEHJB_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="full-scale run; set TREEHJB_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def criterion():
    """Record a pass/fail verdict for an acceptance criterion and assert it."""

    def record(key: str, ok: bool, detail: str = ""):
        _VERDICTS[key] = (bool(ok), detail)
        assert ok, f"criterion {key}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        num = "".join(ch for ch in key if ch.isdigit())
        return (int(num) if num else 0, key)

    for key in sorted(_VERDICTS, key=order):
        ok, detail = _VERDICTS[key]
        terminalreporter.write_line(f"criterion {key:<4s} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def test1():
    return make_test1()


def small_test1_tree(N=4, dt=0.1, eps=0.0, scope="level", strategy=None, controls=(-1.0, 1.0)):
    problem = make_test1()
    grid = TimeGrid(0.0, N * dt, N)
    U = ControlGrid.from_values(list(controls))
    stepper = ExplicitEuler(problem, grid.dt)
    tree = build_tree(problem, stepper, grid, U, np.array([-0.5, 0.5]),
                      PruneConfig(eps=eps, scope=scope, strategy=strategy))
    return problem, grid, U, stepper, tree
