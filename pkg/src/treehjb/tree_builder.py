"""Forward construction of the (optionally pruned) tree of reachable states."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (ControlGrid, LevelStats, NumericalError, OCProblem, ResourceLimitError, TimeGrid,
                   Tree)
from .neighbors import (STRATEGIES, SpatialHashIndex, build_neighbor_index, default_strategy,
                        find_merge_target)

log = logging.getLogger(__name__)

SCOPES = ("level", "tree")


@dataclass(frozen=True)
class PruneConfig:
    """Merging rule for new nodes.

    eps: merge radius; 0 disables merging and yields the full tree.
    scope: "level" compares a new node with nodes already on its own level;
        "tree" compares with every node built so far (autonomous problems only).
    strategy: "brute", "hash" or "pca"; None picks hash in low dimension and
        pca otherwise.
    weight: factor on squared distances; None uses ``problem.state_weight``.
    """

    eps: float = 0.0
    scope: str = "level"
    strategy: Optional[str] = None
    max_nodes: int = 50_000_000
    weight: Optional[float] = None

    def __post_init__(self):
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be finite and >= 0, got {self.eps}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if self.strategy is not None and self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be positive")


def _candidates(stepper, X: np.ndarray, controls: ControlGrid, t: float, level: int) -> np.ndarray:
    """All children of the rows of X, ordered parent-major then control order."""
    k, d = X.shape
    C = np.empty((k, controls.M, d))
    for j in range(controls.M):
        try:
            C[:, j, :] = stepper(X, controls[j], t)
        except NumericalError as exc:
            raise NumericalError(f"level {level}, control {j}: {exc}") from exc
    bad = ~np.all(np.isfinite(C), axis=2)
    if bad.any():
        i, j = (int(v[0]) for v in np.nonzero(bad))
        raise NumericalError(f"non-finite state from parent (level {level}, id {i}) under control {j}")
    return C.reshape(k * controls.M, d)


def build_tree(problem: OCProblem, stepper, grid: TimeGrid, controls: ControlGrid, x0,
               prune: PruneConfig = PruneConfig()) -> Tree:
    """Grow the tree level by level from ``x0``, merging new nodes within ``prune.eps``.

    Parents are expanded in id order and controls in grid order; each new
    candidate either becomes a node of the next level or its edge is pointed
    at the closest existing in-scope node within eps.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != problem.dim:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, problem has {problem.dim}")
    if not np.all(np.isfinite(x0)):
        raise NumericalError("x0 is not finite")
    if controls.m != problem.control_dim:
        raise ValueError(f"controls have dimension {controls.m}, problem expects {problem.control_dim}")
    cross = prune.scope == "tree"
    if cross and not problem.autonomous:
        raise ValueError("cross-level pruning is only valid for autonomous dynamics")
    M = controls.M
    eps = prune.eps
    strategy = prune.strategy or default_strategy(problem.dim)
    scale = math.sqrt(problem.state_weight if prune.weight is None else prune.weight)

    levels = [x0[None, :].copy()]
    children, child_levels = [], []
    stats = [LevelStats(0, 1, 1, 0, 0.0)]
    total = 1
    tree_index = None
    if eps > 0 and cross and strategy != "pca":
        tree_index = build_neighbor_index(levels[0] * scale, strategy, eps)

    for n in range(grid.N):
        tic = time.perf_counter()
        X = levels[n]
        k = len(X)
        if eps == 0 and total + k * M > prune.max_nodes:
            raise ResourceLimitError(f"level {n + 1} would bring the tree to {total + k * M} nodes "
                                     f"(max_nodes={prune.max_nodes})", stats)
        C = _candidates(stepper, X, controls, grid.t(n), n)
        if eps == 0:
            new = C
            gids = total + np.arange(k * M, dtype=np.int64)
        else:
            S = C * scale
            if not cross:
                index = build_neighbor_index(np.empty((0, problem.dim)), strategy, eps, fit=S)
                base = total
            elif tree_index is not None:
                index, base = tree_index, 0
            else:
                existing = np.concatenate(levels) * scale
                index = build_neighbor_index(existing, "pca", eps, fit=np.concatenate([existing, S]))
                base = 0
            rows = S.tolist() if isinstance(index, SpatialHashIndex) else S
            gids = np.empty(k * M, dtype=np.int64)
            keep = []
            cap = prune.max_nodes - total
            for r, p in enumerate(rows):
                hit = find_merge_target(index, p, eps)
                if hit is None:
                    hit = index.insert(p)
                    keep.append(r)
                    if len(keep) > cap:
                        raise ResourceLimitError(f"level {n + 1} exceeded max_nodes={prune.max_nodes}", stats)
                gids[r] = base + hit
            new = C[keep]
        offsets = np.concatenate([[0], np.cumsum([len(lv) for lv in levels]), [total + len(new)]])
        if cross:
            lv = (np.searchsorted(offsets, gids, side="right") - 1).astype(np.int32)
            children.append((gids - offsets[lv]).reshape(k, M))
            child_levels.append(lv.reshape(k, M))
        else:
            children.append((gids - total).reshape(k, M))
        levels.append(np.ascontiguousarray(new))
        total += len(new)
        stats.append(LevelStats(n + 1, len(new), k * M, k * M - len(new), time.perf_counter() - tic))
        log.debug("level %d: %d nodes from %d candidates", n + 1, len(new), k * M)
        if total > prune.max_nodes:
            raise ResourceLimitError(f"tree exceeded max_nodes={prune.max_nodes}", stats)

    return Tree(levels=levels, children=children, child_levels=child_levels if cross else None,
                M=M, stats=stats)
