#!/usr/bin/env python3
"""Test 1 error tables: unpruned, pruned with T=1, pruned with T=3."""
import argparse
import logging

from treehjb.metrics import convergence_order
from treehjb.pipeline import RunConfig, errors_against, exact_reference, run_tsa, summarize_errors

TABLES = {
    "unpruned": dict(eps=0.0, T=1.0, extended=True, dts=[0.2, 0.1, 0.05]),
    "pruned": dict(eps="dt2", T=1.0, extended=None, dts=[0.2, 0.1, 0.05, 0.025, 0.0125]),
    "long": dict(eps="dt2", T=3.0, extended=None, dts=[0.2, 0.1, 0.05]),
}


def table(name, dts=None):
    spec = TABLES[name]
    prev = None
    print(f"{'dt':>8} {'|T|':>9} {'cpu':>7} {'Err22':>7} {'Errinf2':>8} {'ord22':>6} {'ordinf':>6}")
    for dt in dts or spec["dts"]:
        run = run_tsa(RunConfig(problem="test1", dt=dt, T=spec["T"], eps=spec["eps"], extended=spec["extended"]))
        e22, einf = summarize_errors(errors_against(run, exact_reference(run)), dt)
        o22 = oinf = ""
        if prev:
            o22 = f"{convergence_order(prev[1], e22, prev[0] / dt):.3f}"
            oinf = f"{convergence_order(prev[2], einf, prev[0] / dt):.3f}"
        print(f"{dt:8g} {run.tree.size:9d} {run.cpu_seconds:7.2f} {e22:7.4f} {einf:8.4f} {o22:>6} {oinf:>6}")
        prev = (dt, e22, einf)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("which", nargs="*", default=list(TABLES), choices=list(TABLES))
    ap.add_argument("--dts", type=lambda s: [float(v) for v in s.split(",")], default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    for name in args.which:
        print(f"== {name}")
        table(name, args.dts)
