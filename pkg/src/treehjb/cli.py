"""Batch front end.

    treehjb solve [CONFIG] key=value ...
    treehjb convergence [CONFIG] dts=0.2,0.1,0.05 key=value ...
    treehjb compare [CONFIG] key=value ...

CONFIG is a flat ``key = value`` file; command-line pairs override it.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import NumericalError, ResourceLimitError, full_tree_cardinality, write_stats_csv, write_tree_csv
from .feedback import write_trajectory_csv
from .metrics import convergence_order, relative_l2_error
from .oracle import solve_sl_grid, write_grid_csv
from .pipeline import (ConfigError, RunConfig, config_from_mapping, errors_against, exact_reference, run_tsa,
                       sl_reference, summarize_errors, with_overrides)

log = logging.getLogger("treehjb")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


def read_config_file(path) -> dict:
    items = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{path}:{lineno}", f"expected key = value, got {line!r}")
        key, value = line.split(sep, 1)
        items[key.strip()] = value.strip()
    return items


def load_config(tokens) -> RunConfig:
    items = {}
    for tok in tokens:
        if "=" in tok:
            key, value = tok.split("=", 1)
            items[key.strip()] = value.strip()
        else:
            if not Path(tok).is_file():
                raise ConfigError("config", f"no such config file {tok!r}")
            items = {**read_config_file(tok), **items}
    return config_from_mapping(items)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def cmd_solve(cfg: RunConfig) -> dict:
    """Build, solve, synthesise, and write the tree, trajectory and cost curves."""
    run = run_tsa(cfg)
    out = _out_dir(cfg)
    if cfg.dump_tree:
        write_tree_csv(out / "tree.csv", run.tree, run.values)
    write_stats_csv(out / "build_stats.csv", run.tree.stats)
    write_trajectory_csv(out / "trajectory.csv", run.trajectory, run.grid)
    controlled = run.controlled_cost()
    has_zero = run.controls.index_of(np.zeros(run.controls.m)) is not None
    uncontrolled = run.uncontrolled_cost() if has_zero else None
    header = ["n", "t", "controlled_running", "controlled_to_date"]
    if uncontrolled is not None:
        header += ["uncontrolled_running", "uncontrolled_to_date"]
    rows = []
    for n, t in enumerate(run.grid.times):
        row = [n, repr(float(t)), _fmt(controlled.running[n]), _fmt(controlled.to_date[n])]
        if uncontrolled is not None:
            row += [_fmt(uncontrolled.running[n]), _fmt(uncontrolled.to_date[n])]
        rows.append(row)
    _write_rows(out / "cost.csv", header, rows)
    summary = {
        "problem": cfg.problem,
        "dt": run.grid.dt if run.grid.N else cfg.dt,
        "T": run.grid.T,
        "steps": run.grid.N,
        "eps": run.eps,
        "controls": run.controls.M,
        "tree_nodes": run.tree.size,
        "level_nodes": run.tree.level_sizes,
        "merged": [s.merged for s in run.tree.stats],
        "build_seconds": run.build_seconds,
        "solve_seconds": run.solve_seconds,
        "root_value": run.values.root_value,
        "coverage": run.values.coverage,
        "controlled_J": controlled.total,
        "uncontrolled_J": None if uncontrolled is None else uncontrolled.total,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"{cfg.problem}: |T| = {run.tree.size}, V0 = {run.values.root_value:.6g}, "
          f"build+solve {run.cpu_seconds:.2f} s, J = {controlled.total:.6g}"
          + ("" if uncontrolled is None else f" (uncontrolled {uncontrolled.total:.6g})"))
    return summary


def _reference(cfg: RunConfig, run):
    kind = cfg.reference or ("exact" if cfg.problem == "test1" else "sl")
    if kind == "exact":
        return exact_reference(run), 0
    ref, _, untrusted = sl_reference(run, cfg.oracle_dx, cfg.oracle_dt, cfg.oracle_margin)
    if untrusted:
        log.warning("%d tree nodes lie where the grid oracle felt its boundary; enlarge oracle_margin", untrusted)
    return ref, untrusted


def cmd_convergence(cfg: RunConfig) -> list:
    """One row per time step: nodes, cpu time, Err_{2,2}, Err_{inf,2} and orders."""
    dts = cfg.dts or (cfg.dt,)
    rows = []
    prev = None
    for dt in dts:
        run = run_tsa(with_overrides(cfg, dt=dt))
        ref, _ = _reference(cfg, run)
        e22, einf = summarize_errors(errors_against(run, ref, cfg.metric_coverage), dt)
        o22 = oinf = None
        if prev is not None:
            ratio = prev[0] / dt
            o22 = convergence_order(prev[1], e22, ratio)
            oinf = convergence_order(prev[2], einf, ratio)
        rows.append([repr(dt), run.tree.size, f"{run.cpu_seconds:.3f}", _fmt(e22), _fmt(einf), _fmt(o22), _fmt(oinf)])
        print(f"dt={dt:<8g} |T|={run.tree.size:<9d} err22={e22:.4f} errinf2={einf:.4f}"
              + ("" if o22 is None else f" order22={o22:.3f} orderinf2={oinf:.3f}"))
        prev = (dt, e22, einf)
    _write_rows(_out_dir(cfg) / "convergence.csv",
                ["Δt", "tree_nodes", "cpu_seconds", "err22", "errinf2", "order22", "orderinf2"], rows)
    return rows


def cmd_compare(cfg: RunConfig) -> dict:
    """Per-level E_2 of the unpruned and pruned tree solvers (and the grid oracle when the
    reference is exact)."""
    methods = {}
    pruned = run_tsa(cfg)
    full_size = full_tree_cardinality(pruned.controls.M, pruned.grid.N)
    runs = {"tsa_pruned": pruned}
    if pruned.eps > 0 and full_size <= cfg.max_nodes:
        runs["tsa_full"] = run_tsa(with_overrides(cfg, eps=0.0))
    elif pruned.eps > 0:
        log.warning("skipping the unpruned tree: %d nodes exceed max_nodes", full_size)
    ref, untrusted = _reference(cfg, pruned)
    for name, run in runs.items():
        methods[name] = errors_against(run, ref, cfg.metric_coverage)
    kind = cfg.reference or ("exact" if cfg.problem == "test1" else "sl")
    if kind == "exact" and pruned.bench.problem.dim <= 3:
        # classical grid scheme at the same dt, read at the pruned tree's nodes
        margin = cfg.oracle_margin
        X = pruned.tree.all_states()
        dx = cfg.oracle_dx or pruned.grid.dt
        lo = np.floor((X.min(axis=0) - margin) / dx) * dx
        hi = np.ceil((X.max(axis=0) + margin) / dx) * dx
        gv = solve_sl_grid(pruned.bench.problem, lo, hi, dx, pruned.grid, pruned.controls)
        errs = []
        for n in range(pruned.grid.N + 1):
            Xn = pruned.tree.levels[n]
            errs.append(relative_l2_error(gv.interpolate(n, Xn), ref(Xn, n)))
        methods["sl_grid"] = np.array(errs)
        write_grid_csv(_out_dir(cfg) / "grid_value.csv", gv)
    names = list(methods)
    rows = [[n, repr(float(t))] + [_fmt(methods[m][n]) for m in names] for n, t in enumerate(pruned.grid.times)]
    _write_rows(_out_dir(cfg) / "compare.csv", ["n", "t"] + names, rows)
    for m in names:
        print(f"{m:<11s} max E2 = {np.max(methods[m]):.4f}")
    if untrusted:
        print(f"warning: {untrusted} tree nodes touched the oracle boundary", file=sys.stderr)
    return methods


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="treehjb", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("settings", nargs="*", help="config file and/or key=value overrides")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.settings)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ResourceLimitError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
