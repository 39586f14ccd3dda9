import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import RegularGridInterpolator

from treehjb import ControlGrid, OCProblem, TimeGrid, build_tree
from treehjb.core import ResourceLimitError
from treehjb.dp import solve_value
from treehjb.oracle import (GridValue, brute_force_dp, exact_value_test1, multilinear_interpolate, solve_sl_grid,
                            write_grid_csv)
from treehjb.problems import make_test1, make_vdp
from treehjb.stepper import ExplicitEuler


def test_exact_value_examples():
    assert exact_value_test1([-0.5, 0.5], 0.0, 1.0) == pytest.approx(-19 / 12, abs=1e-15)
    assert exact_value_test1([0.0, 0.0], 0.0, 1.0) == pytest.approx(-1 / 3, abs=1e-15)
    assert exact_value_test1([0.7, -2.0], 1.0, 1.0) == 2.0


def test_exact_value_solves_the_hjb_equation():
    # v_t + min_u (u v_x1 + x1^2 v_x2) = 0 away from x1 = 0, checked by finite differences
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(20):
        x = rng.uniform([-1, -1], [1, 1])
        if abs(x[0]) < 0.05:
            continue
        t = rng.uniform(0, 0.9)
        v = lambda y, s: exact_value_test1(y, s, 1.0)
        vt = (v(x, t + h) - v(x, t - h)) / (2 * h)
        vx1 = (v(x + [h, 0], t) - v(x - [h, 0], t)) / (2 * h)
        vx2 = (v(x + [0, h], t) - v(x - [0, h], t)) / (2 * h)
        assert vt - abs(vx1) + x[0] ** 2 * vx2 == pytest.approx(0.0, abs=1e-6)


def _grid_value(lo, hi, dx, fn):
    d = len(lo)
    shape = tuple(int(round((h - l) / s)) + 1 for l, h, s in zip(lo, hi, dx))
    gv = GridValue(lo=np.array(lo, float), dx=np.array(dx, float), shape=shape, grid=TimeGrid(0.0, 1.0, 1))
    gv.values[0] = fn(gv.vertices()).reshape(shape)
    return gv


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
def test_interpolation_exact_on_affine_functions(d, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=d), rng.normal()
    lo = rng.uniform(-2, 0, d)
    dx = rng.uniform(0.1, 0.5, d)
    hi = lo + dx * rng.integers(2, 8, d)
    gv = _grid_value(lo, hi, dx, lambda X: X @ a + b)
    X = rng.uniform(lo, hi, size=(50, d))
    assert np.max(np.abs(gv.interpolate(0, X) - (X @ a + b))) <= 1e-12


def test_interpolation_matches_scipy_on_random_data():
    rng = np.random.default_rng(5)
    lo, hi, dx = [0.0, -1.0, 2.0], [1.0, 1.0, 3.0], [0.25, 0.5, 0.1]
    gv = _grid_value(lo, hi, dx, lambda X: np.zeros(len(X)))
    gv.values[0] = rng.normal(size=gv.shape)
    ref = RegularGridInterpolator(gv.axes(), gv.values[0], method="linear")
    X = rng.uniform(lo, hi, size=(200, 3))
    assert np.allclose(gv.interpolate(0, X), ref(X), atol=1e-13)


def test_interpolation_examples():
    gv = _grid_value([0.0], [1.0], [1.0], lambda X: X[:, 0])
    assert gv.interpolate(0, [0.5]) == 0.5
    assert gv.interpolate(0, [1.0]) == 1.0
    gv.values[0] = np.array([0.0, np.nan])
    with pytest.raises(ValueError):
        multilinear_interpolate(gv, 0, [0.2])


def test_sl_constant_terminal_cost():
    p = OCProblem(dim=2, control_dim=1, dynamics=make_test1().dynamics,
                  terminal_cost=lambda X: np.full(len(X), 1.7))
    gv = solve_sl_grid(p, [-1, -1], [1, 1], 0.1, TimeGrid(0.0, 0.5, 5), ControlGrid.from_values([-1, 1]))
    assert all(np.allclose(v, 1.7) for v in gv.values.values())


def test_sl_one_backward_step_by_hand():
    p = make_test1()
    dt = 0.05
    gv = solve_sl_grid(p, [-1, -1], [1, 2], 0.05, TimeGrid(0.0, dt, 1), ControlGrid.from_values([-1, 1]))
    P = gv.vertices()
    inner = np.all((P > -0.9) & (P < 0.9), axis=1)
    # g is affine, so interpolation is exact: V^0 = -max_u (x2 + dt x1^2)
    expected = -(P[:, 1] + dt * P[:, 0] ** 2)
    assert np.allclose(gv.values[0].ravel()[inner], expected[inner], atol=1e-12)
    assert gv.out_of_domain[0] > 0  # the top rows push feet outside


def test_sl_contamination_tracking():
    p = make_test1()
    grid = TimeGrid(0.0, 0.5, 10)
    gv = solve_sl_grid(p, [-2, -2], [2, 2], 0.05, grid, ControlGrid.from_values([-1, 1]))
    assert gv.trusted(0, [0.0, 0.0])
    assert not gv.trusted(0, [1.99, 0.0])
    assert not gv.trusted(0, [5.0, 0.0])


def test_sl_matches_exact_value_on_test1():
    p = make_test1()
    grid = TimeGrid(0.0, 1.0, 20)
    # x2 only grows, so the box needs headroom above
    gv = solve_sl_grid(p, [-2, -2], [2, 4], 0.05, grid, ControlGrid.from_values([-1, 1]))
    X = np.array([[-0.5, 0.5], [0.2, -0.3], [0.0, 0.0]])
    err = np.abs(gv.interpolate(0, X) - exact_value_test1(X, 0.0, 1.0))
    assert np.all(err < 0.1)
    assert np.all(gv.trusted(0, X))


def test_brute_force_examples():
    p = make_vdp(2)
    U = ControlGrid.from_values([0.3])
    grid = TimeGrid(0.0, 0.3, 3)
    step = ExplicitEuler(p, 0.1)
    x = np.array([[0.5, -0.2]])
    cost = 0.0
    for n in range(3):
        cost += 0.1 * p.running_cost(x, U[0], 0.0)[0]
        x = step(x, U[0], 0.0)
    cost += p.terminal_cost(x)[0]
    assert brute_force_dp(p, [0.5, -0.2], grid, U, step) == pytest.approx(cost, abs=1e-15)
    assert brute_force_dp(p, [0.5, -0.2], TimeGrid(0.0, 0.0, 0), U, step) == p.g([0.5, -0.2])
    with pytest.raises(ResourceLimitError):
        brute_force_dp(p, [0, 0], TimeGrid(0.0, 2.0, 20), ControlGrid.from_values([-1, 0, 1]), step)


def test_grid_csv(tmp_path):
    gv = solve_sl_grid(make_test1(), [-1, -1], [1, 1], 0.5, TimeGrid(0.0, 0.2, 2), ControlGrid.from_values([-1, 1]))
    path = tmp_path / "g.csv"
    write_grid_csv(path, gv)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "d,dx_0,dx_1,lo_0,lo_1,hi_0,hi_1,N"
    assert len(lines) == 2 + 3
    assert len(lines[2].split(",")) == 1 + 25


def test_grid_dimension_limit():
    with pytest.raises(ValueError):
        GridValue(lo=np.zeros(4), dx=np.ones(4), shape=(2, 2, 2, 2), grid=TimeGrid(0.0, 1.0, 1))
