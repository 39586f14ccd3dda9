"""Error norms over tree levels and convergence orders."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .core import TimeGrid, Tree, ValueTable


def relative_l2_error(approx, reference) -> float:
    """sqrt(sum |ref - approx|^2 / sum |ref|^2)."""
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if approx.shape != reference.shape:
        raise ValueError(f"shape mismatch {approx.shape} vs {reference.shape}")
    den = np.sum(reference * reference)
    if den == 0:
        raise ZeroDivisionError("reference vanishes on every node of the level")
    diff = reference - approx
    return math.sqrt(np.sum(diff * diff) / den)


def level_nodes(tree: Tree, values: ValueTable, n: int, extended: bool = False):
    """(states, V^n) on level n, or on levels 0..n when ``extended`` and the table allows it."""
    if extended:
        if not values.extended:
            raise ValueError("value table has native coverage only")
        stop = tree.offsets[n + 1]
        return tree.all_states()[:stop], values.values[n][:stop]
    return tree.levels[n], values.level_values(tree, n)


def level_errors(tree: Tree, values: ValueTable, grid: TimeGrid, reference: Callable,
                 extended: bool = False) -> np.ndarray:
    """E_2(t_n) for n = 0..N against ``reference(states, n) -> values``."""
    out = np.empty(grid.N + 1)
    X_all = tree.all_states() if extended else None
    for n in range(grid.N + 1):
        if extended:
            stop = tree.offsets[n + 1]
            X, V = X_all[:stop], values.values[n][:stop]
        else:
            X, V = tree.levels[n], values.level_values(tree, n)
        out[n] = relative_l2_error(V, reference(X, n))
    return out


def err_22(errors: Sequence[float], dt: float) -> float:
    """sqrt(dt * sum_n E_2(t_n)^2)."""
    e = np.asarray(errors, dtype=float)
    return math.sqrt(dt * np.sum(e * e))


def err_inf2(errors: Sequence[float]) -> float:
    """max_n E_2(t_n)."""
    return float(np.max(np.asarray(errors, dtype=float)))


def convergence_order(err_coarse: float, err_fine: float, step_ratio: float = 2.0) -> float:
    """log(err_coarse / err_fine) / log(step_ratio); log2 of the ratio for halved steps."""
    if not (err_coarse > 0 and err_fine > 0):
        raise ValueError("errors must be positive to compute an order")
    if not step_ratio > 1:
        raise ValueError("step ratio must exceed 1")
    return math.log(err_coarse / err_fine) / math.log(step_ratio)
