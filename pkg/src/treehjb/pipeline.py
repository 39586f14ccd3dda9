"""End-to-end runs: configuration, build + solve + synthesis, and reference errors."""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .core import ControlGrid, TimeGrid, Trajectory, Tree, ValueTable
from .dp import solve
from .feedback import CostEvaluation, control_sequence, evaluate_cost, synthesize_trajectory, zero_controls
from .metrics import err_22, err_inf2, level_errors
from .neighbors import STRATEGIES
from .oracle import GridValue, exact_value_test1, solve_sl_grid
from .problems import PROBLEM_NAMES, Benchmark, get_benchmark
from .stepper import make_stepper
from .tree_builder import SCOPES, PruneConfig, build_tree


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def resolve_eps(eps, dt: float) -> float:
    """Numbers pass through; ``dt2`` is dt^2 and ``dt^p`` is dt**p."""
    if isinstance(eps, (int, float)):
        return float(eps)
    text = str(eps).strip().lower()
    if text == "dt2":
        return dt * dt
    if text == "dt":
        return dt
    m = re.fullmatch(r"dt\^([0-9.]+)", text)
    if m:
        return dt ** float(m.group(1))
    return float(text)


def parse_controls(spec: str, m: int) -> ControlGrid:
    """``-1,0,1`` | ``range:min,max,step`` | ``linspace:min,max,count`` | ``a,b;c,d`` for vectors."""
    spec = spec.strip()
    if spec.startswith("range:"):
        lo, hi, step = (float(v) for v in spec[6:].split(","))
        return ControlGrid.hypercube(lo, hi, step, m=m)
    if spec.startswith("linspace:"):
        lo, hi, count = spec[9:].split(",")
        return ControlGrid.linspace(float(lo), float(hi), int(count), m=m)
    if ";" in spec:
        return ControlGrid.from_values([[float(v) for v in part.split(",")] for part in spec.split(";")])
    return ControlGrid.from_values([[float(v)] for v in spec.split(",")])


@dataclass
class RunConfig:
    problem: str = "test1"
    x0: Optional[tuple] = None
    dt: float = 0.05
    T: Optional[float] = None
    N: Optional[int] = None
    eps: object = 0.0
    controls: Optional[str] = None
    scheme: Optional[str] = None
    scope: Optional[str] = None
    strategy: Optional[str] = None
    out_dir: str = "out"
    threads: int = 1
    d: Optional[int] = None
    max_nodes: int = 50_000_000
    extended: Optional[bool] = None
    dump_tree: bool = True
    # reference / comparison settings
    dts: Optional[tuple] = None
    reference: Optional[str] = None
    oracle_dx: Optional[float] = None
    oracle_dt: Optional[float] = None
    oracle_margin: float = 1.0
    metric_coverage: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEM_NAMES:
            raise ConfigError("problem", f"unknown problem {self.problem!r}; known: {', '.join(PROBLEM_NAMES)}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt", "must be a positive number")
        if self.T is not None and self.T < 0:
            raise ConfigError("T", "must be >= 0")
        if self.N is not None and self.N < 0:
            raise ConfigError("N", "must be a nonnegative integer")
        if self.scheme not in (None, "explicit", "implicit"):
            raise ConfigError("scheme", "must be explicit or implicit")
        if self.scope not in (None,) + SCOPES:
            raise ConfigError("scope", f"must be one of {SCOPES}")
        if self.strategy not in (None,) + STRATEGIES:
            raise ConfigError("strategy", f"must be one of {STRATEGIES}")
        if self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        if self.reference not in (None, "exact", "sl"):
            raise ConfigError("reference", "must be exact or sl")
        if self.metric_coverage not in (None, "level", "subtree"):
            raise ConfigError("metric_coverage", "must be level or subtree")
        try:
            eps = resolve_eps(self.eps, self.dt)
        except ValueError:
            raise ConfigError("eps", f"expected a number, dt2 or dt^p, got {self.eps!r}") from None
        if not (eps >= 0 and math.isfinite(eps)):
            raise ConfigError("eps", "must be >= 0")
        if self.dts is not None:
            if len(self.dts) < 1 or any(not v > 0 for v in self.dts):
                raise ConfigError("dts", "must be a list of positive steps")
            if any(b >= a for a, b in zip(self.dts, self.dts[1:])):
                raise ConfigError("dts", "steps must be strictly decreasing")
        return self


_INT_KEYS = {"N", "threads", "d", "max_nodes"}
_FLOAT_KEYS = {"dt", "T", "oracle_dx", "oracle_dt", "oracle_margin"}
_BOOL_KEYS = {"extended", "dump_tree"}


def config_from_mapping(items: dict) -> RunConfig:
    """Build a RunConfig from string key/value pairs (config file plus overrides)."""
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(key, "unknown key")
        value = str(raw).strip()
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                kwargs[key] = value.lower() in ("true", "1", "yes")
            elif key == "x0":
                kwargs[key] = tuple(float(v) for v in value.split(","))
            elif key == "dts":
                kwargs[key] = tuple(float(v) for v in value.split(","))
            elif key == "eps":
                kwargs[key] = value
            else:
                kwargs[key] = value
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r}") from None
    return RunConfig(**kwargs).validate()


@dataclass
class RunResult:
    config: RunConfig
    bench: Benchmark
    grid: TimeGrid
    controls: ControlGrid
    x0: np.ndarray
    eps: float
    tree: Tree
    values: ValueTable
    trajectory: Trajectory
    stepper: object
    build_seconds: float
    solve_seconds: float
    extra: dict = field(default_factory=dict)

    @property
    def cpu_seconds(self) -> float:
        return self.build_seconds + self.solve_seconds

    def controlled_cost(self) -> CostEvaluation:
        """Cost of the synthesised controls applied to the true discrete dynamics."""
        return evaluate_cost(self.bench.problem, self.grid, self.x0,
                             control_sequence(self.trajectory, self.controls), self.stepper)

    def uncontrolled_cost(self) -> CostEvaluation:
        return evaluate_cost(self.bench.problem, self.grid, self.x0,
                             zero_controls(self.bench.problem, self.grid), self.stepper)


def benchmark_for(cfg: RunConfig) -> Benchmark:
    bench = get_benchmark(cfg.problem, d=cfg.d)
    if cfg.controls is not None:
        try:
            bench.controls = parse_controls(cfg.controls, bench.problem.control_dim)
        except ValueError as exc:
            raise ConfigError("controls", str(exc)) from None
        if bench.controls.m != bench.problem.control_dim:
            raise ConfigError("controls", f"expected {bench.problem.control_dim}-dimensional controls")
    if cfg.x0 is not None:
        if len(cfg.x0) != bench.problem.dim:
            raise ConfigError("x0", f"expected {bench.problem.dim} components, got {len(cfg.x0)}")
        bench.x0 = np.asarray(cfg.x0, dtype=float)
    return bench


def time_grid_for(cfg: RunConfig, bench: Benchmark, dt: float) -> TimeGrid:
    if cfg.N is not None:
        return TimeGrid(0.0, cfg.N * dt, cfg.N)
    T = bench.T if cfg.T is None else cfg.T
    try:
        return TimeGrid.from_step(dt, T)
    except ValueError as exc:
        raise ConfigError("dt", str(exc)) from None


def run_tsa(cfg: RunConfig, dt: Optional[float] = None) -> RunResult:
    """Build the tree, solve the value function and synthesise the optimal path."""
    cfg.validate()
    dt = cfg.dt if dt is None else dt
    bench = benchmark_for(cfg)
    grid = time_grid_for(cfg, bench, dt)
    scheme = cfg.scheme or bench.scheme
    scope = cfg.scope or bench.scope
    if scope == "tree" and not bench.problem.autonomous:
        raise ConfigError("scope", f"{cfg.problem} is non-autonomous; only level scope is valid")
    try:
        stepper = make_stepper(bench.problem, dt, scheme)
    except ValueError as exc:
        raise ConfigError("scheme", str(exc)) from None
    eps = resolve_eps(cfg.eps, dt)
    prune = PruneConfig(eps=eps, scope=scope, strategy=cfg.strategy, max_nodes=cfg.max_nodes)
    tic = time.perf_counter()
    tree = build_tree(bench.problem, stepper, grid, bench.controls, bench.x0, prune)
    built = time.perf_counter()
    extended = cfg.extended if cfg.extended is not None else tree.cross_level
    if extended and not bench.problem.autonomous:
        raise ConfigError("extended", "the extended sweep needs autonomous dynamics")
    values = solve(tree, bench.problem, grid, bench.controls, extended=extended)
    solved = time.perf_counter()
    traj = synthesize_trajectory(tree, values, bench.problem, grid, bench.controls)
    return RunResult(cfg, bench, grid, bench.controls, bench.x0, eps, tree, values, traj, stepper,
                     built - tic, solved - built)


def exact_reference(run: RunResult):
    if run.bench.name != "test1":
        raise ConfigError("reference", f"no closed-form value function for {run.bench.name}")
    return lambda X, n: exact_value_test1(X, run.grid.t(n), run.grid.T)


def sl_reference(run: RunResult, dx: Optional[float] = None, dt: Optional[float] = None,
                 margin: float = 1.0) -> tuple:
    """Solve the grid oracle on the tree's bounding box (plus ``margin``) and return
    (reference callable, GridValue, number of tree nodes whose oracle value saw the boundary)."""
    problem = run.bench.problem
    if problem.dim > 3:
        raise ConfigError("reference", f"grid oracle needs d <= 3, {run.bench.name} has d={problem.dim}")
    dx = run.grid.dt if dx is None else dx
    dt = run.grid.dt if dt is None else dt
    ratio = run.grid.dt / dt
    sub = int(round(ratio))
    if sub < 1 or abs(ratio - sub) > 1e-9:
        raise ConfigError("oracle_dt", f"must divide the tree step {run.grid.dt}")
    X = run.tree.all_states()
    lo = np.floor((X.min(axis=0) - margin) / dx) * dx
    hi = np.ceil((X.max(axis=0) + margin) / dx) * dx
    ogrid = TimeGrid(run.grid.t0, run.grid.T, run.grid.N * sub)
    gv = solve_sl_grid(problem, lo, hi, dx, ogrid, run.controls, save=range(0, ogrid.N + 1, sub))
    untrusted = 0
    for n in range(run.grid.N + 1):
        untrusted += int(np.sum(~gv.trusted(n * sub, run.tree.levels[n])))
    return (lambda Xq, n: gv.interpolate(n * sub, Xq)), gv, untrusted


def errors_against(run: RunResult, reference, coverage: Optional[str] = None) -> np.ndarray:
    """Per-level relative errors; ``subtree`` coverage uses levels 0..n when values allow it."""
    if coverage is None:
        coverage = "subtree" if run.values.extended else "level"
    return level_errors(run.tree, run.values, run.grid, reference, extended=coverage == "subtree")


def summarize_errors(errors: np.ndarray, dt: float) -> tuple:
    return err_22(errors, dt), err_inf2(errors)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes).validate()
