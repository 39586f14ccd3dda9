"""Backward dynamic programming on a tree and the Lipschitz certificate of V^n."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ControlGrid, NumericalError, OCProblem, TimeGrid, Tree, TreeStructureError, ValueTable


def _index_dtype(M: int):
    return np.uint8 if M <= 255 else np.int32


def _bellman(child_values: np.ndarray, states: np.ndarray, problem: OCProblem, controls: ControlGrid,
             t: float, dt: float) -> np.ndarray:
    """Q[i, j] = e^{-lambda dt} V(child_ij) + dt L(x_i, u_j, t)."""
    q = math.exp(-problem.discount * dt) * child_values
    for j in range(controls.M):
        q[:, j] += dt * problem.running_cost(states, controls[j], t)
    if not np.all(np.isfinite(q)):
        raise NumericalError(f"non-finite Bellman values at t={t}")
    return q


def _terminal(problem: OCProblem, states: np.ndarray) -> np.ndarray:
    v = np.asarray(problem.terminal_cost(states), dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericalError("terminal cost is not finite")
    return v


def solve_value(tree: Tree, problem: OCProblem, grid: TimeGrid, controls: ControlGrid) -> ValueTable:
    """V^n on each level's own nodes, swept backward from V^N = g.

    The minimum over controls is a direct comparison; ``argmin`` keeps the
    lowest control index on ties.
    """
    if tree.cross_level:
        raise TreeStructureError("tree was pruned across levels; use solve_value_autonomous")
    if tree.depth != grid.N:
        raise TreeStructureError(f"tree has {tree.depth} steps, time grid has {grid.N}")
    N = grid.N
    values = [None] * (N + 1)
    argmin = [None] * N
    values[N] = _terminal(problem, tree.levels[N])
    for n in range(N - 1, -1, -1):
        ch = tree.children[n]
        if ch.size and ch.max() >= len(values[n + 1]):
            bad = np.argwhere(ch >= len(values[n + 1]))[0]
            raise TreeStructureError(f"node (level {n}, id {bad[0]}) has no child value for control {bad[1]}")
        q = _bellman(values[n + 1][ch], tree.levels[n], problem, controls, grid.t(n), grid.dt)
        a = np.argmin(q, axis=1)
        values[n] = q[np.arange(len(q)), a]
        argmin[n] = a.astype(_index_dtype(controls.M))
    return ValueTable(values, argmin, "native")


def solve_value_autonomous(tree: Tree, problem: OCProblem, grid: TimeGrid,
                           controls: ControlGrid) -> ValueTable:
    """V^n on every node of levels 0..n, for time-independent dynamics.

    The final cost is imposed on the whole tree; edges do not depend on time,
    so each backward step reuses the same adjacency for all earlier levels.
    """
    if not problem.autonomous:
        raise ValueError("the extended sweep needs autonomous dynamics")
    if tree.depth != grid.N:
        raise TreeStructureError(f"tree has {tree.depth} steps, time grid has {grid.N}")
    N = grid.N
    off = tree.offsets
    X = tree.all_states()
    G = np.concatenate([tree.global_children(n) for n in range(N)]) if N else np.empty((0, controls.M), int)
    values = [None] * (N + 1)
    argmin = [None] * N
    values[N] = _terminal(problem, X)
    for n in range(N - 1, -1, -1):
        stop = off[n + 1]
        ch = G[:stop]
        if ch.size and ch.max() >= len(values[n + 1]):
            g = int(np.argwhere(ch >= len(values[n + 1]))[0, 0])
            raise TreeStructureError(f"global node {g} points past the nodes valued at step {n + 1}")
        q = _bellman(values[n + 1][ch], X[:stop], problem, controls, grid.t(n), grid.dt)
        a = np.argmin(q, axis=1)
        values[n] = q[np.arange(len(q)), a]
        argmin[n] = a.astype(_index_dtype(controls.M))
    return ValueTable(values, argmin, "extended")


def solve(tree: Tree, problem: OCProblem, grid: TimeGrid, controls: ControlGrid,
          extended: bool = False) -> ValueTable:
    if extended or tree.cross_level:
        return solve_value_autonomous(tree, problem, grid, controls)
    return solve_value(tree, problem, grid, controls)


def check_dp_consistency(tree: Tree, values: ValueTable, problem: OCProblem, grid: TimeGrid,
                         controls: ControlGrid) -> float:
    """Largest |V^n(node) - min_j {e^{-lambda dt} V^{n+1}(child_j) + dt L}| over valued nodes."""
    worst = 0.0
    if values.extended:
        X = tree.all_states()
        G = np.concatenate([tree.global_children(n) for n in range(grid.N)]) if grid.N else None
        worst = float(np.max(np.abs(values.values[grid.N] - _terminal(problem, X))))
        for n in range(grid.N):
            stop = tree.offsets[n + 1]
            q = _bellman(values.values[n + 1][G[:stop]], X[:stop], problem, controls, grid.t(n), grid.dt)
            worst = max(worst, float(np.max(np.abs(q.min(axis=1) - values.values[n]))))
    else:
        worst = float(np.max(np.abs(values.values[grid.N] - _terminal(problem, tree.levels[grid.N]))))
        for n in range(grid.N):
            q = _bellman(values.values[n + 1][tree.children[n]], tree.levels[n], problem, controls,
                         grid.t(n), grid.dt)
            worst = max(worst, float(np.max(np.abs(q.min(axis=1) - values.values[n]))))
    return worst


@dataclass(frozen=True)
class LipschitzData:
    L_f: float
    L_L: float
    L_g: float
    discount: float
    T: float

    def __post_init__(self):
        for name in ("L_f", "L_L", "L_g", "discount"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def lipschitz_bound(data: LipschitzData, t_n: float, distance: float) -> float:
    """Upper bound on |V^n(x) - V^n(y)| for |x - y| = ``distance`` at time t_n."""
    tau = data.T - t_n
    rate = data.L_f - data.discount
    growth = math.exp(tau * rate)
    if rate > 0:
        factor = data.L_L / rate * (growth - 1.0) + data.L_g * growth
    else:
        factor = data.L_L * tau + data.L_g * growth
    return distance * factor
