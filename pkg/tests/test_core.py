import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treehjb import ControlGrid, PruneConfig, TimeGrid, Tree, build_tree
from treehjb.core import (TreeStructureError, check_cardinality, full_tree_cardinality, read_tree_csv,
                          validate_tree, write_stats_csv, write_tree_csv)
from treehjb.dp import solve_value
from treehjb.problems import make_test1
from treehjb.stepper import ExplicitEuler

from conftest import small_test1_tree


@pytest.mark.parametrize("M,N,expected", [(2, 5, 63), (2, 20, 2097151), (1, 10, 11), (3, 0, 1)])
def test_full_tree_cardinality_examples(M, N, expected):
    assert full_tree_cardinality(M, N) == expected


@given(st.integers(1, 6), st.integers(0, 15))
def test_full_tree_cardinality_is_geometric_sum(M, N):
    assert full_tree_cardinality(M, N) == sum(M ** i for i in range(N + 1))


def test_cardinality_overflow_is_reported():
    with pytest.raises(OverflowError):
        check_cardinality(10, 30)
    assert check_cardinality(2, 20) == 2097151


@pytest.mark.parametrize("M", [1, 2, 3])
def test_cardinality_law_by_construction(M):
    problem = make_test1()
    U = ControlGrid.from_values(np.linspace(-1.0, 1.0, M) if M > 1 else [0.5])
    for N in range(0, 13):
        grid = TimeGrid(0.0, 0.05 * N, N) if N else TimeGrid(0.0, 0.0, 0)
        tree = build_tree(problem, ExplicitEuler(problem, grid.dt if N else 0.0), grid, U, [-0.5, 0.5])
        assert tree.size == full_tree_cardinality(M, N)


@given(lo=st.floats(-3, 3), width=st.floats(0, 4), step=st.floats(0.05, 1.0), m=st.integers(1, 2))
def test_hypercube_count(lo, width, step, m):
    hi = lo + width
    grid = ControlGrid.hypercube(lo, hi, step, m=m)
    per_axis = int(np.floor(width / step + 1e-9)) + 1
    assert grid.M == per_axis ** m
    assert grid.m == m
    assert np.all(grid.points <= hi + 1e-9)


def test_control_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        ControlGrid.from_values([1.0, 1.0])
    with pytest.raises(ValueError):
        ControlGrid.from_values([])
    with pytest.raises(ValueError):
        ControlGrid.from_values([0.0, np.nan])
    assert ControlGrid.hypercube(-1, 1, 0.2).M == 11
    assert ControlGrid.from_values([-1, 0, 1]).index_of(0) == 1
    assert ControlGrid.from_values([-1, 1]).index_of(0) is None


@given(st.integers(1, 400), st.floats(0.1, 10.0))
def test_time_grid_ends_exactly_at_T(N, T):
    g = TimeGrid(0.0, T, N)
    assert g.t(N) == T
    assert g.times[-1] == T
    assert len(g.times) == N + 1
    assert g.dt == pytest.approx(T / N)


def test_time_grid_from_step():
    assert TimeGrid.from_step(0.05, 1.0).N == 20
    assert TimeGrid.from_step(0.0125, 3.0).N == 240
    with pytest.raises(ValueError):
        TimeGrid.from_step(0.3, 1.0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, -1)


def test_problem_validation():
    p = make_test1()
    assert p.f([1.0, 0.0], 0.5).tolist() == [0.5, 1.0]
    assert p.g([3.0, 2.0]) == -2.0
    with pytest.raises(ValueError):
        type(p)(dim=2, control_dim=1, dynamics=p.dynamics, terminal_cost=p.terminal_cost, discount=-1.0)
    bad = type(p)(dim=3, control_dim=1, dynamics=p.dynamics, terminal_cost=p.terminal_cost)
    with pytest.raises(ValueError):
        bad.f(np.zeros(3), 1.0)


def test_validate_unpruned_tree_has_zero_residual():
    problem, grid, U, stepper, tree = small_test1_tree(N=6)
    diag = validate_tree(tree, problem, grid, stepper, U)
    assert diag.max_residual == 0.0
    assert diag.edges_checked == full_tree_cardinality(2, 6) - 1


@pytest.mark.parametrize("scope", ["level", "tree"])
def test_validate_pruned_tree_residual_within_eps(scope):
    dt = 0.05
    problem, grid, U, stepper, tree = small_test1_tree(N=20, dt=dt, eps=dt ** 2, scope=scope)
    diag = validate_tree(tree, problem, grid, stepper, U, tol=dt ** 2)
    assert 0 < diag.max_residual <= dt ** 2
    assert diag.dangling == []


def test_validate_reports_dangling_child():
    problem, grid, U, stepper, tree = small_test1_tree(N=3)
    children = [c.copy() for c in tree.children]
    children[2][3, 1] = 99
    broken = Tree(levels=[lv.copy() for lv in tree.levels], children=children, M=tree.M)
    with pytest.raises(TreeStructureError, match=r"\(2, 3, 1, 3, 99\)"):
        validate_tree(broken, problem, grid, stepper, U)


def test_level_sizes_bounded_by_fan_out():
    _, _, U, _, tree = small_test1_tree(N=20, dt=0.05, eps=0.0025)
    sizes = tree.level_sizes
    assert sizes[0] == 1
    assert all(b <= U.M * a for a, b in zip(sizes, sizes[1:]))


def test_tree_arrays_are_read_only():
    _, _, _, _, tree = small_test1_tree(N=2)
    with pytest.raises(ValueError):
        tree.levels[1][0, 0] = 1.0


def test_tree_csv_roundtrip(tmp_path):
    problem, grid, U, _, tree = small_test1_tree(N=3)
    values = solve_value(tree, problem, grid, U)
    path = tmp_path / "tree.csv"
    write_tree_csv(path, tree, values)
    rows = read_tree_csv(path)
    assert list(rows[0]) == ["level", "id", "x_0", "x_1", "value", "argmin_u"]
    assert len(rows) == tree.size
    last = rows[-1]
    assert last["argmin_u"] == ""
    assert float(last["value"]) == problem.g(tree.levels[3][-1])
    write_stats_csv(tmp_path / "s.csv", tree.stats)
    with open(tmp_path / "s.csv", encoding="utf-8") as fh:
        assert next(csv.reader(fh)) == ["level", "nodes", "candidates", "merged"]
