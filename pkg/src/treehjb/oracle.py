"""Reference solutions used to validate the tree solver.

* a semi-Lagrangian scheme on a regular grid (d <= 3) with multilinear
  interpolation at the feet of the characteristics,
* the closed-form value function of the Test-1 problem,
* exhaustive enumeration of control sequences for tiny instances.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import ControlGrid, NumericalError, OCProblem, ResourceLimitError, TimeGrid

log = logging.getLogger(__name__)

MAX_GRID_DIM = 3


def _stencil(lo: np.ndarray, dx: np.ndarray, shape: tuple, X: np.ndarray):
    """Flat vertex ids and weights of the 2^d vertices enclosing each row of X.

    Points outside the box are clamped onto it first.
    """
    d = len(shape)
    s = (X - lo) / dx
    dims = np.asarray(shape)
    i0 = np.clip(np.floor(s).astype(np.int64), 0, dims - 2)
    w = np.clip(s - i0, 0.0, 1.0)
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(d)], dtype=np.int64)
    base = i0 @ strides
    ids = np.empty((len(X), 2 ** d), dtype=np.int64)
    wts = np.empty((len(X), 2 ** d))
    for c, corner in enumerate(itertools.product((0, 1), repeat=d)):
        corner = np.asarray(corner)
        ids[:, c] = base + corner @ strides
        wts[:, c] = np.prod(np.where(corner == 1, w, 1.0 - w), axis=1)
    return ids, wts


def _apply(values_flat: np.ndarray, stencil) -> np.ndarray:
    ids, wts = stencil
    return np.einsum("ij,ij->i", values_flat[ids], wts)


@dataclass
class GridValue:
    """Grid values V^n on the vertices of a box, stored for a subset of time levels."""

    lo: np.ndarray
    dx: np.ndarray
    shape: tuple
    grid: TimeGrid
    values: dict = field(default_factory=dict)
    contaminated: dict = field(default_factory=dict)
    out_of_domain: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.shape) > MAX_GRID_DIM:
            raise ValueError(f"grid oracle supports d <= {MAX_GRID_DIM}")
        if min(self.shape) < 2:
            raise ValueError("need at least 2 vertices per axis")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.dx * (np.asarray(self.shape) - 1)

    def axes(self) -> list:
        return [self.lo[k] + self.dx[k] * np.arange(self.shape[k]) for k in range(self.dim)]

    def vertices(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def inside(self, X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=1)

    def interpolate(self, n: int, X) -> np.ndarray:
        return multilinear_interpolate(self, n, X)

    def trusted(self, n: int, X) -> np.ndarray:
        """True where the interpolated value at level n never saw a clamped foot point."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ok = self.inside(X)
        if n in self.contaminated:
            cont = _apply(self.contaminated[n].ravel().astype(float), _stencil(self.lo, self.dx, self.shape, X))
            ok &= cont == 0
        return ok


def multilinear_interpolate(grid: GridValue, n: int, X) -> np.ndarray:
    """Tensor-product linear interpolation of V^n at the rows of X (scalar for a single point)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != grid.dim:
        raise ValueError(f"points have dimension {X.shape[1]}, grid has {grid.dim}")
    if n not in grid.values:
        raise KeyError(f"level {n} was not stored")
    V = grid.values[n]
    if np.isnan(V).any():
        raise ValueError(f"level {n} holds NaN vertex values")
    out = _apply(V.ravel(), _stencil(grid.lo, grid.dx, grid.shape, X))
    return float(out[0]) if single else out


def solve_sl_grid(problem: OCProblem, lo, hi, dx, grid: TimeGrid, controls: ControlGrid,
                  save: Optional[Iterable[int]] = None) -> GridValue:
    """Semi-Lagrangian sweep V^n_i = min_u [dt L(x_i,u,t_n) + e^{-lambda dt} I[V^{n+1}](x_i + dt f)].

    Feet outside the box are clamped onto it; every such event is counted per
    level and marks the vertex as contaminated, and contamination travels
    backward through the interpolation stencils so callers can tell which
    values are unaffected by the boundary. ``save`` lists the time levels to
    keep (all by default).
    """
    d = problem.dim
    if d > MAX_GRID_DIM:
        raise ValueError(f"grid oracle supports d <= {MAX_GRID_DIM}, problem has d={d}")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,)).copy()
    dx = np.broadcast_to(np.asarray(dx, dtype=float), (d,)).copy()
    shape = tuple(int(round((hi[k] - lo[k]) / dx[k])) + 1 for k in range(d))
    gv = GridValue(lo=lo, dx=dx, shape=shape, grid=grid)
    keep = set(range(grid.N + 1)) if save is None else set(save)
    P = gv.vertices()
    hi = gv.hi
    dt = grid.dt
    disc = math.exp(-problem.discount * dt)

    V = np.asarray(problem.terminal_cost(P), dtype=float)
    C = np.zeros(len(P), dtype=bool)
    out_counts = np.zeros(grid.N + 1, dtype=np.int64)
    if grid.N in keep:
        gv.values[grid.N] = V.reshape(shape)
        gv.contaminated[grid.N] = C.reshape(shape)
    cache = {}
    for n in range(grid.N - 1, -1, -1):
        t = grid.t(n)
        best = np.full(len(P), np.inf)
        Cn = np.zeros(len(P), dtype=bool)
        for j in range(controls.M):
            if problem.autonomous and j in cache:
                st, out = cache[j]
            else:
                F = P + dt * problem.dynamics(P, controls[j], t)
                if not np.all(np.isfinite(F)):
                    raise NumericalError(f"non-finite foot points at level {n}, control {j}")
                out = ~np.all((F >= lo - 1e-12) & (F <= hi + 1e-12), axis=1)
                st = _stencil(lo, dx, shape, F)
                if problem.autonomous:
                    cache[j] = (st, out)
            q = dt * problem.running_cost(P, controls[j], t) + disc * _apply(V, st)
            np.minimum(best, q, out=best)
            out_counts[n] += int(out.sum())
            Cn |= out
            if C.any():
                Cn |= _apply(C.astype(float), st) > 0
        V, C = best, Cn
        if n in keep:
            gv.values[n] = V.reshape(shape)
            gv.contaminated[n] = C.reshape(shape)
    gv.out_of_domain = out_counts
    log.debug("SL grid %s: %d clamped feet in total", shape, int(out_counts.sum()))
    return gv


def write_grid_csv(path, gv: GridValue) -> None:
    """Header row ``d,dx_*,lo_*,hi_*,N`` with its values, then one row per stored level:
    ``n`` followed by the vertex values in row-major order."""
    d = gv.dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["d"] + [f"dx_{k}" for k in range(d)] + [f"lo_{k}" for k in range(d)]
                   + [f"hi_{k}" for k in range(d)] + ["N"])
        w.writerow([d] + [repr(float(v)) for v in gv.dx] + [repr(float(v)) for v in gv.lo]
                   + [repr(float(v)) for v in gv.hi] + [gv.grid.N])
        for n in sorted(gv.values):
            w.writerow([n] + [repr(float(v)) for v in gv.values[n].ravel()])


def exact_value_test1(x, t, T: float):
    """Closed-form value of Test 1: -x2 - x1^2 (T-t) - (T-t)^3 / 3 - |x1| (T-t)^2."""
    x = np.asarray(x, dtype=float)
    tau = T - np.asarray(t, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    v = -x2 - x1 ** 2 * tau - tau ** 3 / 3.0 - np.abs(x1) * tau ** 2
    return float(v) if np.ndim(v) == 0 else v


def brute_force_dp(problem: OCProblem, x0, grid: TimeGrid, controls: ControlGrid, stepper,
                   max_sequences: int = 10 ** 6) -> float:
    """Minimum discrete cost over all M^N control sequences, each simulated on its own."""
    count = controls.M ** grid.N
    if count > max_sequences:
        raise ResourceLimitError(f"{count} control sequences exceed the cap of {max_sequences}")
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    best = math.inf
    for seq in itertools.product(range(controls.M), repeat=grid.N):
        y = x0
        cost = 0.0
        for n, j in enumerate(seq):
            t = grid.t(n)
            cost += math.exp(-problem.discount * (t - grid.t0)) * grid.dt * float(
                problem.running_cost(y, controls[j], t)[0])
            y = stepper(y, controls[j], t)
        cost += math.exp(-problem.discount * (grid.T - grid.t0)) * float(problem.terminal_cost(y)[0])
        best = min(best, cost)
    return best
