"""Shared domain types: problems, time/control grids, the tree and value tables."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

# (states (k, d), control (m,), time) -> (k, d)
Dynamics = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
# (states (k, d), control (m,), time) -> (k,)
RunningCost = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
# states (k, d) -> (k,)
TerminalCost = Callable[[np.ndarray], np.ndarray]


class TreeStructureError(ValueError):
    """Raised when tree adjacency or value-table layout is inconsistent."""


class NumericalError(ArithmeticError):
    """Raised when dynamics or costs produce non-finite numbers."""


class ResourceLimitError(RuntimeError):
    """Raised when a configured size cap is exceeded."""

    def __init__(self, message: str, stats=None):
        super().__init__(message)
        self.stats = stats


def zero_running_cost(x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
    return np.zeros(x.shape[0])


@dataclass(frozen=True)
class ControlGrid:
    """Ordered, finite set of control vectors ``points`` with shape (M, m)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("control set must be a nonempty list of vectors")
        if not np.all(np.isfinite(pts)):
            raise ValueError("control values must be finite")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("control points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_values(cls, values: Sequence) -> "ControlGrid":
        return cls(np.asarray(values, dtype=float))

    @classmethod
    def hypercube(cls, lo, hi, step: float, m: int = 1) -> "ControlGrid":
        """Tensor grid on [lo, hi]^m with spacing ``step`` starting at ``lo``.

        ``lo``/``hi`` may be scalars or per-axis sequences of length m.
        """
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,))
        if step <= 0 or np.any(hi < lo):
            raise ValueError("need step > 0 and hi >= lo")
        axes = []
        for a, b in zip(lo, hi):
            # small slack so that e.g. (1 - -1) / 0.2 counts 11 points, not 10
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            axes.append(a + step * np.arange(count))
        return cls(np.array(list(itertools.product(*axes))))

    @classmethod
    def linspace(cls, lo, hi, count: int, m: int = 1) -> "ControlGrid":
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,))
        axes = [np.linspace(a, b, count) for a, b in zip(lo, hi)]
        return cls(np.array(list(itertools.product(*axes))))

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.M

    def __getitem__(self, j: int) -> np.ndarray:
        return self.points[j]

    def index_of(self, u) -> Optional[int]:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        hits = np.flatnonzero(np.all(self.points == u, axis=1))
        return int(hits[0]) if len(hits) else None


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_n = t0 + n*dt, n = 0..N, with t_N = T exactly."""

    t0: float
    T: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"number of steps must be a nonnegative integer, got {self.N}")
        if self.N > 0 and not self.T > self.t0:
            raise ValueError("horizon T must exceed t0")
        if self.N == 0 and self.T != self.t0:
            raise ValueError("a zero-step grid needs T == t0")

    @classmethod
    def from_step(cls, dt: float, T: float, t0: float = 0.0) -> "TimeGrid":
        ratio = (T - t0) / dt
        N = int(round(ratio))
        if abs(ratio - N) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(f"dt={dt} does not divide [{t0}, {T}] into whole steps")
        return cls(t0, T if N > 0 else t0, N)

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.N if self.N else 0.0

    def t(self, n: int) -> float:
        return self.T if n == self.N else self.t0 + n * self.dt

    @property
    def times(self) -> np.ndarray:
        ts = self.t0 + self.dt * np.arange(self.N + 1)
        ts[-1] = self.T
        return ts


@dataclass(frozen=True)
class OCProblem:
    """Finite-horizon optimal control problem.

    ``dynamics``, ``running_cost`` and ``terminal_cost`` are vectorised over the
    leading axis of the state array. ``state_weight`` scales squared Euclidean
    distances between states (1 for plain l2, dx for a discrete L2 norm).
    ``linear`` carries the (A, B) form when the dynamics are linear-affine,
    which enables implicit stepping.
    """

    dim: int
    control_dim: int
    dynamics: Dynamics
    terminal_cost: TerminalCost
    running_cost: RunningCost = zero_running_cost
    discount: float = 0.0
    autonomous: bool = True
    lipschitz: Optional[tuple] = None
    state_weight: float = 1.0
    linear: Optional[object] = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1 or self.control_dim < 1:
            raise ValueError("state and control dimensions must be positive")
        if self.discount < 0:
            raise ValueError("discount must be >= 0")
        if self.state_weight <= 0:
            raise ValueError("state_weight must be positive")
        if self.lipschitz is not None:
            if len(self.lipschitz) != 3 or any(not (c >= 0 and math.isfinite(c)) for c in self.lipschitz):
                raise ValueError("lipschitz must be three finite nonnegative constants (L_f, L_L, L_g)")

    def f(self, x, u, t: float = 0.0) -> np.ndarray:
        """Dynamics at a single state or a batch; keeps the input's shape."""
        x = np.asarray(x, dtype=float)
        out = self.dynamics(np.atleast_2d(x), np.atleast_1d(np.asarray(u, dtype=float)), t)
        if out.shape[-1] != self.dim:
            raise ValueError(f"dynamics returned dimension {out.shape[-1]}, expected {self.dim}")
        return out.reshape(x.shape)

    def L(self, x, u, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        out = self.running_cost(np.atleast_2d(x), np.atleast_1d(np.asarray(u, dtype=float)), t)
        return float(out[0]) if x.ndim == 1 else out

    def g(self, x):
        x = np.asarray(x, dtype=float)
        out = self.terminal_cost(np.atleast_2d(x))
        return float(out[0]) if x.ndim == 1 else out

    def distance(self, a, b) -> np.ndarray:
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.sqrt(self.state_weight * np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class Node:
    state: np.ndarray
    level: int
    id: int


def full_tree_cardinality(M: int, N: int) -> int:
    """Number of nodes of the unpruned tree: sum_{i=0}^{N} M^i."""
    if M < 1 or N < 0:
        raise ValueError("need M >= 1 and N >= 0")
    # python ints never wrap; callers that need a machine-size bound use
    # check_cardinality
    if M == 1:
        return N + 1
    return (M ** (N + 1) - 1) // (M - 1)


def check_cardinality(M: int, N: int, limit: int = np.iinfo(np.int64).max) -> int:
    """``full_tree_cardinality`` but raises OverflowError above ``limit``."""
    size = full_tree_cardinality(M, N)
    if size > limit:
        raise OverflowError(f"tree with M={M}, N={N} has {size} nodes, above the limit {limit}")
    return size


@dataclass
class LevelStats:
    level: int
    nodes: int
    candidates: int
    merged: int
    seconds: float


@dataclass
class Tree:
    """Leveled node store with per-node, per-control child adjacency.

    ``levels[n]`` holds the states of level n as rows. ``children[n][i, j]`` is
    the index of the child of node (n, i) under control j, inside the level
    given by ``child_levels[n][i, j]`` (always n + 1 unless the tree was pruned
    across levels, in which case ``child_levels`` is set).
    """

    levels: list
    children: list
    child_levels: Optional[list] = None
    M: int = 1
    stats: list = field(default_factory=list)

    def __post_init__(self):
        for arr in itertools.chain(self.levels, self.children, self.child_levels or ()):
            arr.setflags(write=False)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def dim(self) -> int:
        return self.levels[0].shape[1]

    @property
    def level_sizes(self) -> list:
        return [len(lv) for lv in self.levels]

    @property
    def size(self) -> int:
        return sum(self.level_sizes)

    def __len__(self) -> int:
        return self.size

    @property
    def cross_level(self) -> bool:
        return self.child_levels is not None

    @property
    def offsets(self) -> np.ndarray:
        """Global id of the first node of each level (plus the total at the end)."""
        return np.concatenate([[0], np.cumsum(self.level_sizes)]).astype(np.int64)

    def node(self, level: int, idx: int) -> Node:
        return Node(self.levels[level][idx], level, idx)

    def all_states(self) -> np.ndarray:
        return np.concatenate(self.levels, axis=0)

    def child_level_array(self, n: int) -> np.ndarray:
        if self.child_levels is None:
            return np.full(self.children[n].shape, n + 1, dtype=np.int64)
        return self.child_levels[n]

    def global_children(self, n: int) -> np.ndarray:
        """Children of level n expressed as global ids, shape (|T^n|, M)."""
        return self.offsets[self.child_level_array(n)] + self.children[n]

    def child_states(self, n: int, j: int) -> np.ndarray:
        """States of the children of all level-n nodes under control j."""
        idx = self.children[n][:, j]
        if self.child_levels is None:
            return self.levels[n + 1][idx]
        return self.all_states()[self.global_children(n)[:, j]]


@dataclass
class ValueTable:
    """Values V^n attached to tree nodes.

    With ``coverage == "native"`` ``values[n]`` is indexed by the level-local
    id of T^n. With ``coverage == "extended"`` ``values[n]`` covers every node
    of T^0..T^n, indexed by global id.
    """

    values: list
    argmin: list
    coverage: str = "native"

    def __post_init__(self):
        if self.coverage not in ("native", "extended"):
            raise ValueError(f"unknown coverage {self.coverage!r}")

    @property
    def extended(self) -> bool:
        return self.coverage == "extended"

    def level_values(self, tree: Tree, n: int) -> np.ndarray:
        """V^n on the native nodes of level n."""
        if not self.extended:
            return self.values[n]
        off = tree.offsets
        return self.values[n][off[n]:off[n + 1]]

    def value_at(self, tree: Tree, n: int, level: int, idx: int) -> float:
        if self.extended:
            if level > n:
                raise TreeStructureError(f"V^{n} is undefined on level {level}")
            return float(self.values[n][tree.offsets[level] + idx])
        if level != n:
            raise TreeStructureError(f"native table has no V^{n} on level {level}")
        return float(self.values[n][idx])

    def argmin_at(self, tree: Tree, n: int, level: int, idx: int) -> int:
        if self.extended:
            return int(self.argmin[n][tree.offsets[level] + idx])
        if level != n:
            raise TreeStructureError(f"native table has no argmin at step {n} on level {level}")
        return int(self.argmin[n][idx])

    @property
    def root_value(self) -> float:
        return float(self.values[0][0])


@dataclass
class Trajectory:
    states: np.ndarray
    control_indices: np.ndarray
    step_costs: np.ndarray
    terminal_cost: float
    nodes: list = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.step_costs) + self.terminal_cost)

    @property
    def cumulative_costs(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.step_costs)])


@dataclass
class TreeDiagnostics:
    max_residual: float
    edges_checked: int
    dangling: list


def validate_tree(tree: Tree, problem: OCProblem, grid: "TimeGrid", stepper, controls: ControlGrid,
                  tol: Optional[float] = None) -> TreeDiagnostics:
    """Recompute every edge and report the largest ``||child - step(parent)||``.

    Structural corruption (ids out of bounds, wrong fan-out) raises
    TreeStructureError listing the offending nodes. If ``tol`` is given, edge
    residuals above it are reported as dangling too.
    """
    if len(tree.levels[0]) != 1:
        raise TreeStructureError(f"level 0 must hold exactly one node, found {len(tree.levels[0])}")
    if tree.depth != grid.N:
        raise TreeStructureError(f"tree has {tree.depth} steps, time grid has {grid.N}")
    bad = []
    for n, ch in enumerate(tree.children):
        if ch.shape != (len(tree.levels[n]), controls.M):
            raise TreeStructureError(f"level {n}: adjacency shape {ch.shape}, expected "
                                     f"({len(tree.levels[n])}, {controls.M})")
        lv = tree.child_level_array(n)
        sizes = np.asarray(tree.level_sizes)
        ok_level = (lv >= 0) & (lv <= n + 1)
        ok_idx = ok_level & (ch >= 0) & (ch < sizes[np.clip(lv, 0, len(sizes) - 1)])
        for i, j in zip(*np.nonzero(~ok_idx)):
            bad.append((n, int(i), int(j), int(lv[i, j]), int(ch[i, j])))
    if bad:
        raise TreeStructureError("dangling child references (level, node, control, child level, "
                                 f"child id): {bad[:20]}")
    worst = 0.0
    edges = 0
    over = []
    scale = math.sqrt(problem.state_weight)
    for n in range(tree.depth):
        parents = tree.levels[n]
        for j in range(controls.M):
            image = stepper(parents, controls[j], grid.t(n))
            res = scale * np.linalg.norm(tree.child_states(n, j) - image, axis=1)
            edges += len(res)
            if len(res):
                worst = max(worst, float(res.max()))
            if tol is not None:
                for i in np.flatnonzero(res > tol):
                    over.append((n, int(i), j, float(res[i])))
    return TreeDiagnostics(max_residual=worst, edges_checked=edges, dangling=over)


def write_tree_csv(path, tree: Tree, values: Optional[ValueTable] = None) -> None:
    """Dump nodes as ``level,id,x_0..x_{d-1},value,argmin_u``.

    ``value`` is V^n on the node's own level; ``argmin_u`` is empty on the
    terminal level.
    """
    d = tree.dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "id"] + [f"x_{k}" for k in range(d)] + ["value", "argmin_u"])
        for n, states in enumerate(tree.levels):
            if values is not None:
                v = values.level_values(tree, n)
                if n < tree.depth:
                    a = values.argmin[n]
                    if values.extended:
                        off = tree.offsets
                        a = a[off[n]:off[n + 1]]
                else:
                    a = None
            for i, x in enumerate(states):
                row = [n, i] + [repr(float(c)) for c in x]
                if values is None:
                    row += ["", ""]
                else:
                    row += [repr(float(v[i])), "" if a is None else int(a[i])]
                w.writerow(row)


def write_stats_csv(path, stats: Sequence[LevelStats], timings: bool = False) -> None:
    """Per-level build counts; wall times only on request so reruns stay byte-identical."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "nodes", "candidates", "merged"] + (["seconds"] if timings else []))
        for s in stats:
            w.writerow([s.level, s.nodes, s.candidates, s.merged] + ([f"{s.seconds:.6f}"] if timings else []))


def read_tree_csv(path) -> list:
    """Read a tree dump back as a list of row dicts (used by tests and tools)."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
