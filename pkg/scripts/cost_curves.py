#!/usr/bin/env python3
"""Controlled vs uncontrolled cost for the driven oscillator and the PDE benchmarks."""
import argparse
import logging

import numpy as np

from treehjb.core import ResourceLimitError
from treehjb.pipeline import RunConfig, run_tsa

log = logging.getLogger("cost_curves")

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("problems", nargs="*",
                default=["driven", "heat-smooth", "heat-indicator", "wave-quadratic", "wave-phi"])
ap.add_argument("--d", type=int, default=100, help="grid points (heat) or half the state size (wave)")
ap.add_argument("--dt", type=float, default=0.05)
ap.add_argument("--eps", default=None, help="default dt2, or dt^1.5 for the wave problems")
ap.add_argument("--max-nodes", type=int, default=2_000_000)
ap.add_argument("-v", action="store_true")
args = ap.parse_args()
logging.basicConfig(level=logging.INFO if args.v else logging.WARNING)

for name in args.problems:
    eps = args.eps or ("dt^1.5" if name.startswith("wave") else "dt2")
    cfg = RunConfig(problem=name, dt=args.dt, eps=eps, d=None if name == "driven" else args.d,
                    max_nodes=args.max_nodes)
    try:
        run = run_tsa(cfg)
    except ResourceLimitError as exc:
        print(f"{name}: {exc}")
        continue
    c, u = run.controlled_cost(), run.uncontrolled_cost()
    below = bool(np.all(c.to_date <= u.to_date + 1e-12))
    print(f"{name:15s} eps={eps:6s} |T|={run.tree.size:8d} J={c.total:.5f} uncontrolled={u.total:.5f} "
          f"below at every step: {below}  ({run.cpu_seconds:.1f} s)")
