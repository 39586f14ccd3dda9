import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from treehjb import TimeGrid
from treehjb.feedback import evaluate_cost, zero_controls
from treehjb.problems import (PROBLEM_NAMES, CostSpec, cycle_limit, get_benchmark, heat_semidiscretization,
                              make_driven_oscillator, make_test1, make_vdp, phi_nonquadratic, vdp3_controls,
                              wave_semidiscretization)
from treehjb.stepper import ExplicitEuler, ImplicitEuler


def test_test1_definition():
    p = make_test1()
    assert p.f([1.0, 0.0], 0.5).tolist() == [0.5, 1.0]
    assert p.g([3.0, 2.0]) == -2.0
    assert p.L([1.0, 1.0], 1.0) == 0.0
    assert p.discount == 0.0 and p.autonomous


def test_vdp_cases():
    for case in (1, 2):
        assert make_vdp(case).f([0.0, 0.0], 0.0).tolist() == [0.0, 0.0]
    p1 = make_vdp(1)
    assert p1.g([3.0, 4.0]) == 25.0
    assert p1.L([3.0, 4.0], 1.0) == 0.0
    p2 = make_vdp(2)
    assert p2.L([1.0, 2.0], 1.0) == pytest.approx(5.01)
    p3 = make_vdp(3)
    assert p3.control_dim == 2
    # damping acts through the first control
    assert p3.f([0.5, 1.0], [0.2, 0.0]).tolist() == pytest.approx([1.0, 0.2 * 0.75 - 0.5])
    assert p3.L([1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.1 + 0.1 * 0.5)
    with pytest.raises(ValueError):
        make_vdp(4)
    assert vdp3_controls().M == 100
    assert vdp3_controls(step=0.2).M == 121


def test_driven_oscillator():
    p = make_driven_oscillator()
    assert not p.autonomous
    assert p.f([0.0, 0.0], 0.0, 0.0).tolist() == [0.0, 0.0]
    assert p.f([0.0, 0.0], 0.0, 1.0)[1] == pytest.approx(1.0)
    assert cycle_limit(0.0) == pytest.approx([-4 / math.pi ** 2, 0.0])


def test_cycle_limit_is_a_periodic_solution():
    w = math.pi / 2
    t = np.linspace(0, 8, 50)
    x = cycle_limit(t)
    h = 1e-5
    dx = (cycle_limit(t + h) - cycle_limit(t - h)) / (2 * h)
    assert np.allclose(dx[:, 0], x[:, 1], atol=1e-8)
    assert np.allclose(dx[:, 1], -w * x[:, 1] - w ** 2 * x[:, 0] + np.sin(w * t), atol=1e-8)


def test_uncontrolled_driven_oscillator_approaches_cycle_limit():
    p = make_driven_oscillator()
    grid = TimeGrid(0.0, 20.0, 4000)
    ev = evaluate_cost(p, grid, [-0.5, 0.5], zero_controls(p, grid), ExplicitEuler(p, grid.dt))
    gap = np.linalg.norm(ev.states - cycle_limit(grid.times), axis=1)
    early, late = gap[:400].max(), gap[-400:].max()
    assert late < 0.1 * early


def test_heat_matrix_d3():
    dyn, problem, B = heat_semidiscretization(3, sigma=0.1)
    expected = 0.1 * 16 * np.array([[-2, 1, 0], [1, -2, 1], [0, 1, -2]], dtype=float)
    assert np.allclose(dyn.A.toarray(), expected, atol=1e-14)
    assert B[1] == pytest.approx(0.25)
    assert problem.state_weight == 0.25
    _, _, Bi = heat_semidiscretization(9, profile="indicator")
    assert Bi[0] == 0.0  # x = 0.1
    with pytest.raises(ValueError):
        heat_semidiscretization(1)


@pytest.mark.parametrize("d", [2, 7, 25, 50])
def test_heat_matrix_negative_definite(d):
    dyn, _, _ = heat_semidiscretization(d)
    A = dyn.A.toarray()
    assert np.allclose(A, A.T)
    assert np.max(np.linalg.eigvalsh(A)) < 0


def test_uncontrolled_heat_is_dissipative():
    dyn, problem, y = heat_semidiscretization(100, profile="indicator")
    step = ImplicitEuler(dyn, 0.05)
    y = y[None, :]
    for _ in range(20):
        nxt = step(y, np.array([0.0]), 0.0)
        assert np.linalg.norm(nxt) <= np.linalg.norm(y)
        y = nxt


def test_wave_block_structure():
    dyn, problem, y0 = wave_semidiscretization(2)
    A = dyn.A.toarray()
    dx = 1 / 3
    D2 = np.array([[-2, 1], [1, -2]]) / dx ** 2
    assert np.allclose(A[:2, :2], 0) and np.allclose(A[:2, 2:], np.eye(2))
    assert np.allclose(A[2:, :2], 0.5 * D2) and np.allclose(A[2:, 2:], 0)
    assert problem.dim == 4
    _, _, _ = wave_semidiscretization(9)
    dyn9, _, _ = wave_semidiscretization(9)
    chi = dyn9.B[9:, 0]
    assert chi[4] == 1.0 and chi[1] == 0.0  # x = 0.5 and x = 0.2
    assert np.all(dyn9.B[:9] == 0)
    with pytest.raises(ValueError):
        wave_semidiscretization(10, actuator=(0.5, 1.5))
    dyn_full, _, _ = wave_semidiscretization(999)
    assert dyn_full.dim == 1998


def test_phi_values_and_continuity():
    assert phi_nonquadratic(0.5) == pytest.approx(1.0)
    assert phi_nonquadratic(1.0) == 1.0
    assert phi_nonquadratic(2.0) == 2.0
    assert phi_nonquadratic(0.0) == 0.0
    for b in (0.5, 1.0):
        assert phi_nonquadratic(b - 1e-9) == pytest.approx(phi_nonquadratic(b + 1e-9), abs=1e-6)


@given(st.floats(-50, 50))
def test_phi_even(s):
    assert phi_nonquadratic(s) == phi_nonquadratic(-s)


def test_cost_spec_rejects_negative_weights():
    with pytest.raises(ValueError):
        CostSpec(delta1=-1.0)
    c = CostSpec(delta1=1.0, gamma=0.5, weight=0.1)
    X = np.array([[1.0, 2.0]])
    assert c.running(X, np.array([2.0]), 0.0)[0] == pytest.approx(0.5 + 2.0)


def test_registry():
    for name in PROBLEM_NAMES:
        b = get_benchmark(name, d=6)
        assert b.x0.shape == (b.problem.dim,)
        assert b.controls.m == b.problem.control_dim
    assert get_benchmark("test1").controls.points.ravel().tolist() == [-1.0, 1.0]
    assert get_benchmark("heat-smooth", d=1000).problem.dim == 1000
    assert get_benchmark("wave-phi").problem.dim == 200
    with pytest.raises(KeyError):
        get_benchmark("heat-cold")
