"""Optimal trajectories read off the tree, and cost evaluation along control sequences."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ControlGrid, OCProblem, TimeGrid, Trajectory, Tree, TreeStructureError, ValueTable


def _child(tree: Tree, level: int, idx: int, j: int) -> tuple:
    lv = level + 1 if tree.child_levels is None else int(tree.child_levels[level][idx, j])
    return lv, int(tree.children[level][idx, j])


def feedback_control(tree: Tree, values: ValueTable, problem: OCProblem, grid: TimeGrid,
                     controls: ControlGrid, n: int, node: tuple) -> int:
    """Recompute the minimising control index at ``node`` = (level, id) for step n."""
    level, idx = node
    x = tree.levels[level][idx][None, :]
    disc = math.exp(-problem.discount * grid.dt)
    q = np.empty(controls.M)
    for j in range(controls.M):
        v = values.value_at(tree, n + 1, *_child(tree, level, idx, j))
        q[j] = disc * v + grid.dt * float(problem.running_cost(x, controls[j], grid.t(n))[0])
    return int(np.argmin(q))


def synthesize_trajectory(tree: Tree, values: ValueTable, problem: OCProblem, grid: TimeGrid,
                          controls: ControlGrid) -> Trajectory:
    """Follow the stored argmin controls from the root down the tree edges."""
    if tree.cross_level and not values.extended:
        raise TreeStructureError("tree was pruned across levels; the value table must have extended coverage")
    if len(values.values) != grid.N + 1:
        raise TreeStructureError(f"value table has {len(values.values) - 1} steps, grid has {grid.N}")
    node = (0, 0)
    nodes = [node]
    states = [tree.levels[0][0]]
    idxs, costs = [], []
    for n in range(grid.N):
        j = values.argmin_at(tree, n, *node)
        x = tree.levels[node[0]][node[1]][None, :]
        step = grid.dt * float(problem.running_cost(x, controls[j], grid.t(n))[0])
        costs.append(math.exp(-problem.discount * (grid.t(n) - grid.t0)) * step)
        idxs.append(j)
        node = _child(tree, node[0], node[1], j)
        nodes.append(node)
        states.append(tree.levels[node[0]][node[1]])
    terminal = math.exp(-problem.discount * (grid.T - grid.t0)) * problem.g(states[-1])
    return Trajectory(states=np.array(states), control_indices=np.array(idxs, dtype=np.int64),
                      step_costs=np.array(costs), terminal_cost=terminal, nodes=nodes)


@dataclass
class CostEvaluation:
    """Forward simulation under a fixed control sequence.

    ``running[n]`` is the discounted running cost accumulated on [t0, t_n];
    ``to_date[n]`` adds the discounted terminal cost of the state reached at
    t_n, i.e. the cost functional of the same controls truncated at t_n.
    """

    states: np.ndarray
    running: np.ndarray
    to_date: np.ndarray

    @property
    def total(self) -> float:
        return float(self.to_date[-1])


def evaluate_cost(problem: OCProblem, grid: TimeGrid, x0, control_sequence, stepper) -> CostEvaluation:
    """Discretised cost J = sum_n e^{-lambda(t_n-t0)} dt L(y_n,u_n,t_n) + e^{-lambda(T-t0)} g(y_N)."""
    U = np.asarray(control_sequence, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape != (grid.N, problem.control_dim):
        raise ValueError(f"control sequence has shape {U.shape}, expected ({grid.N}, {problem.control_dim})")
    y = np.asarray(x0, dtype=float).reshape(1, -1)
    if y.shape[1] != problem.dim:
        raise ValueError(f"x0 has dimension {y.shape[1]}, problem has {problem.dim}")
    states = [y[0]]
    running = [0.0]
    for n in range(grid.N):
        t = grid.t(n)
        disc = math.exp(-problem.discount * (t - grid.t0))
        running.append(running[-1] + disc * grid.dt * float(problem.running_cost(y, U[n], t)[0]))
        y = stepper(y, U[n], t)
        states.append(y[0])
    states = np.array(states)
    times = grid.times
    terminal = np.exp(-problem.discount * (times - grid.t0)) * problem.terminal_cost(states)
    running = np.array(running)
    return CostEvaluation(states=states, running=running, to_date=running + terminal)


def zero_controls(problem: OCProblem, grid: TimeGrid) -> np.ndarray:
    return np.zeros((grid.N, problem.control_dim))


def control_sequence(traj: Trajectory, controls: ControlGrid) -> np.ndarray:
    return controls.points[traj.control_indices]


def write_trajectory_csv(path, traj: Trajectory, grid: TimeGrid) -> None:
    """Columns ``n,t,x_0..x_{d-1},u_index,step_cost,cumulative_cost``; the last row has no control."""
    d = traj.states.shape[1]
    cum = traj.cumulative_costs
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "t"] + [f"x_{k}" for k in range(d)] + ["u_index", "step_cost", "cumulative_cost"])
        for n, x in enumerate(traj.states):
            last = n == len(traj.states) - 1
            w.writerow([n, repr(grid.t(n))] + [repr(float(c)) for c in x]
                       + ["" if last else int(traj.control_indices[n]),
                          "" if last else repr(float(traj.step_costs[n])), repr(float(cum[n]))])
