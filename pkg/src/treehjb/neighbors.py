"""Epsilon-ball search structures used when merging tree nodes.

Every index stores points under integer ids given in insertion order and
answers ``query(p, eps)`` with the id of the closest stored point within
Euclidean distance ``eps`` (lowest id on ties), or ``None``.
"""

from __future__ import annotations

import bisect
import itertools
import math
from typing import Optional

import numpy as np

STRATEGIES = ("brute", "hash", "pca")
HASH_MAX_DIM = 4


class _Buffer:
    """Growable row store."""

    def __init__(self, dim: int, capacity: int = 64):
        self.data = np.empty((max(capacity, 1), dim))
        self.n = 0

    def append(self, p) -> int:
        if self.n == len(self.data):
            self.data = np.concatenate([self.data, np.empty_like(self.data)])
        self.data[self.n] = p
        self.n += 1
        return self.n - 1

    def extend(self, P: np.ndarray) -> None:
        need = self.n + len(P)
        if need > len(self.data):
            grown = np.empty((max(need, 2 * len(self.data)), self.data.shape[1]))
            grown[:self.n] = self.data[:self.n]
            self.data = grown
        self.data[self.n:need] = P
        self.n = need

    @property
    def rows(self) -> np.ndarray:
        return self.data[:self.n]


def _pick(ids: np.ndarray, dists: np.ndarray, eps: float) -> Optional[int]:
    inside = dists <= eps
    if not inside.any():
        return None
    ids, dists = ids[inside], dists[inside]
    return int(ids[dists == dists.min()].min())


class BruteForceIndex:
    strategy = "brute"

    def __init__(self, dim: int):
        self.dim = dim
        self._buf = _Buffer(dim)

    def __len__(self) -> int:
        return self._buf.n

    def insert(self, p) -> int:
        return self._buf.append(p)

    def query(self, p, eps: float) -> Optional[int]:
        if self._buf.n == 0:
            return None
        rows = self._buf.rows
        dists = np.sqrt(np.sum((rows - np.asarray(p)) ** 2, axis=1))
        return _pick(np.arange(len(rows)), dists, eps)


class SpatialHashIndex:
    """Uniform hash grid with cell size eps; a query looks at the 3^d cells around p."""

    strategy = "hash"

    def __init__(self, dim: int, eps: float):
        if not eps > 0:
            raise ValueError("spatial hash needs eps > 0")
        self.dim = dim
        self.eps = eps
        # a hair larger than eps so rounding in p/cell cannot push an
        # eps-neighbour two cells away
        self.cell = eps * (1.0 + 1e-9)
        self._cells: dict = {}
        self._pts: list = []
        self._offsets = list(itertools.product((-1, 0, 1), repeat=dim))
        self.cells_inspected = 0

    def __len__(self) -> int:
        return len(self._pts)

    def _key(self, p) -> tuple:
        c = self.cell
        return tuple(math.floor(v / c) for v in p)

    def insert(self, p) -> int:
        p = tuple(float(v) for v in p)
        i = len(self._pts)
        self._pts.append(p)
        self._cells.setdefault(self._key(p), []).append(i)
        return i

    def query(self, p, eps: float) -> Optional[int]:
        if eps > self.eps:
            raise ValueError(f"index built for eps={self.eps}, queried with {eps}")
        p = tuple(float(v) for v in p)
        key = self._key(p)
        cells = self._cells
        pts = self._pts
        best = None
        best_d = eps
        inspected = 0
        for off in self._offsets:
            inspected += 1
            bucket = cells.get(tuple(k + o for k, o in zip(key, off)))
            if not bucket:
                continue
            for i in bucket:
                dd = math.dist(p, pts[i])
                if dd < best_d or (dd == best_d and (best is None or i < best)):
                    best, best_d = i, dd
        self.cells_inspected = inspected
        return best


class PCAIndex:
    """Points sorted by their coordinate along one principal direction.

    A query scans only the stored points whose projection lies within eps of
    the probe's projection; projection onto a unit vector cannot increase
    distances, so no eps-neighbour is missed.
    """

    strategy = "pca"

    def __init__(self, dim: int, direction: np.ndarray):
        self.dim = dim
        v = np.asarray(direction, dtype=float)
        self.direction = v / np.linalg.norm(v)
        self._buf = _Buffer(dim)
        self._keys: list = []
        self._ids: list = []
        self.scanned = 0

    @staticmethod
    def principal_direction(states: np.ndarray) -> Optional[np.ndarray]:
        """First right singular vector of the centred data, or None if degenerate."""
        X = np.asarray(states, dtype=float)
        if len(X) < 2:
            return None
        Xc = X - X.mean(axis=0)
        if not np.any(Xc):
            return None
        _, s, vt = np.linalg.svd(Xc, full_matrices=False)
        if s[0] <= 0:
            return None
        v = vt[0]
        # fixed sign so repeated fits are reproducible
        k = int(np.argmax(np.abs(v)))
        return v if v[k] > 0 else -v

    def __len__(self) -> int:
        return self._buf.n

    def insert(self, p) -> int:
        p = np.asarray(p, dtype=float)
        i = self._buf.append(p)
        key = float(p @ self.direction)
        pos = bisect.bisect_right(self._keys, key)
        self._keys.insert(pos, key)
        self._ids.insert(pos, i)
        return i

    def bulk_load(self, P: np.ndarray) -> None:
        """Insert many points at once (ids continue in row order)."""
        start = self._buf.n
        self._buf.extend(P)
        keys = np.asarray(self._keys + list(self._buf.rows[start:] @ self.direction))
        ids = np.asarray(self._ids + list(range(start, self._buf.n)), dtype=np.int64)
        order = np.lexsort((ids, keys))
        self._keys = keys[order].tolist()
        self._ids = ids[order].tolist()

    def query(self, p, eps: float) -> Optional[int]:
        p = np.asarray(p, dtype=float)
        key = float(p @ self.direction)
        lo = bisect.bisect_left(self._keys, key - eps)
        hi = bisect.bisect_right(self._keys, key + eps)
        self.scanned = hi - lo
        if hi == lo:
            return None
        ids = np.asarray(self._ids[lo:hi])
        diff = self._buf.data[ids] - p
        return _pick(ids, np.sqrt(np.sum(diff * diff, axis=1)), eps)


def build_neighbor_index(states, strategy: str, eps: float, fit=None):
    """Create an index of the given strategy holding ``states`` (ids = row order).

    ``fit`` supplies the data the pca direction is computed from (defaults to
    ``states``). Degenerate data, where no principal direction exists, falls
    back to brute force; so does ``hash`` above HASH_MAX_DIM dimensions.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise ValueError("states must be a (k, d) array")
    dim = states.shape[1]
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown neighbour strategy {strategy!r}; choose from {STRATEGIES}")
    if strategy in ("hash", "pca") and not eps > 0:
        raise ValueError(f"{strategy} index needs eps > 0")
    if strategy == "hash" and dim <= HASH_MAX_DIM:
        index = SpatialHashIndex(dim, eps)
    elif strategy == "pca" or strategy == "hash":
        direction = PCAIndex.principal_direction(states if fit is None else fit)
        if direction is None:
            index = BruteForceIndex(dim)
        else:
            index = PCAIndex(dim, direction)
            index.bulk_load(states)
            return index
    else:
        index = BruteForceIndex(dim)
    for p in states:
        index.insert(p)
    return index


def default_strategy(dim: int) -> str:
    return "hash" if dim <= HASH_MAX_DIM else "pca"


def find_merge_target(index, candidate, eps: float) -> Optional[int]:
    """Closest indexed node within ``eps`` of ``candidate`` (lowest id on ties)."""
    return index.query(candidate, eps)
