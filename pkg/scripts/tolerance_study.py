#!/usr/bin/env python3
"""Convergence order of Test 1 as the merge tolerance is loosened."""
import argparse

from treehjb.metrics import convergence_order
from treehjb.pipeline import RunConfig, errors_against, exact_reference, run_tsa, summarize_errors

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--dts", default="0.2,0.1,0.05,0.025")
ap.add_argument("--eps", default="dt,dt^1.5,dt2")
args = ap.parse_args()
dts = [float(v) for v in args.dts.split(",")]

for eps in args.eps.split(","):
    errs = []
    for dt in dts:
        run = run_tsa(RunConfig(problem="test1", dt=dt, eps=eps))
        errs.append((summarize_errors(errors_against(run, exact_reference(run)), dt)[0], run.tree.size))
    orders = [convergence_order(a[0], b[0], dts[i] / dts[i + 1]) for i, (a, b) in enumerate(zip(errs, errs[1:]))]
    print(f"eps={eps:7s} Err22={[round(e, 4) for e, _ in errs]} |T|={[n for _, n in errs]} "
          f"orders={[round(o, 3) for o in orders]}")
