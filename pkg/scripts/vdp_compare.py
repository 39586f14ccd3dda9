#!/usr/bin/env python3
"""Van der Pol: per-level relative error of pruned and unpruned trees against a fine grid solve."""
import argparse
import csv

import numpy as np

from treehjb.pipeline import RunConfig, errors_against, run_tsa, sl_reference, with_overrides

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--case", default="vdp1", choices=["vdp1", "vdp2"])
ap.add_argument("--dt", type=float, default=0.05)
ap.add_argument("--oracle-dx", type=float, default=0.01)
ap.add_argument("--out", default="vdp_errors.csv")
args = ap.parse_args()

cfg = RunConfig(problem=args.case, dt=args.dt, eps="dt2")
pruned = run_tsa(cfg)
full = run_tsa(with_overrides(cfg, eps=0.0))
ref, gv, untrusted = sl_reference(pruned, dx=args.oracle_dx, dt=args.oracle_dx)
ep = errors_against(pruned, ref)
ef = errors_against(full, ref, "subtree" if full.values.extended else "level")
print(f"|T| pruned {pruned.tree.size}, unpruned {full.tree.size}; oracle grid {gv.shape}, untrusted {untrusted}")
print(f"max E2 pruned {ep.max():.4f}, unpruned {ef.max():.4f}, max gap {np.abs(ep - ef).max():.4f}")
with open(args.out, "w", newline="", encoding="utf-8") as fh:
    w = csv.writer(fh)
    w.writerow(["n", "t", "pruned", "unpruned"])
    for n, t in enumerate(pruned.grid.times):
        w.writerow([n, repr(float(t)), repr(float(ep[n])), repr(float(ef[n]))])
