import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treehjb.neighbors import (BruteForceIndex, PCAIndex, SpatialHashIndex, build_neighbor_index,
                               default_strategy, find_merge_target)


def _brute(P, q, eps):
    d = np.sqrt(np.sum((P - q) ** 2, axis=1))
    inside = np.flatnonzero(d <= eps)
    if len(inside) == 0:
        return None
    return int(inside[np.argmin(d[inside])])


@pytest.mark.parametrize("strategy", ["brute", "hash", "pca"])
def test_strategies_match_brute_force_on_random_probes(strategy):
    rng = np.random.default_rng(42)
    P = rng.random((10_000, 2))
    eps = 1e-3
    index = build_neighbor_index(P, strategy, eps)
    # half the probes sit within eps of a stored point, half are uniform
    near = P[rng.integers(0, len(P), 50)] + rng.normal(scale=eps / 2, size=(50, 2))
    probes = np.vstack([near, rng.random((50, 2))])
    hits = 0
    for q in probes:
        expected = _brute(P, q, eps)
        assert find_merge_target(index, q, eps) == expected
        hits += expected is not None
    assert hits >= 40


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(2, 60), st.integers(0, 2 ** 31 - 1))
def test_strategies_agree_in_low_dimension(dim, k, seed):
    rng = np.random.default_rng(seed)
    P = np.round(rng.random((k, dim)) * 4) / 4  # many exact ties
    eps = 0.3
    indexes = [build_neighbor_index(P, s, eps) for s in ("brute", "hash", "pca")]
    for q in rng.random((10, dim)):
        answers = {find_merge_target(ix, q, eps) for ix in indexes}
        assert answers == {_brute(P, q, eps)}


def test_hash_inspects_at_most_three_to_the_d_cells():
    for d in (1, 2, 3):
        ix = SpatialHashIndex(d, 0.1)
        ix.insert(np.zeros(d))
        ix.query(np.full(d, 0.05), 0.1)
        assert ix.cells_inspected <= 3 ** d


def test_merge_target_examples():
    eps = 0.01
    ix = BruteForceIndex(2)
    ix.insert([0.0, 0.0])
    ix.insert([0.006, 0.0])
    assert find_merge_target(ix, [0.0, 0.0], eps) == 0
    assert find_merge_target(ix, [0.0, 1.5 * eps], eps) is None
    # distances 0.3 eps and 0.6 eps: the closer wins even though it was inserted later
    ix2 = BruteForceIndex(1)
    ix2.insert([0.6 * eps])
    ix2.insert([0.3 * eps])
    assert find_merge_target(ix2, [0.0], eps) == 1


def test_ties_go_to_lowest_id():
    for strategy in ("brute", "hash", "pca"):
        P = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
        ix = build_neighbor_index(P, strategy, 1.5)
        assert find_merge_target(ix, [0.0, 0.0], 1.5) == 0


def test_pca_direction_and_degenerate_fallback():
    rng = np.random.default_rng(3)
    P = np.outer(rng.normal(size=200), [3.0, 4.0]) / 5.0 + 1e-3 * rng.normal(size=(200, 2))
    v = PCAIndex.principal_direction(P)
    assert abs(abs(v @ np.array([0.6, 0.8])) - 1) < 1e-4
    assert PCAIndex.principal_direction(np.ones((5, 3))) is None
    assert isinstance(build_neighbor_index(np.ones((5, 3)), "pca", 0.1), BruteForceIndex)


def test_pca_scans_only_the_window():
    P = np.column_stack([np.arange(1000.0), np.zeros(1000)])
    ix = build_neighbor_index(P, "pca", 0.5)
    assert find_merge_target(ix, [500.2, 0.0], 0.5) == 500
    assert ix.scanned == 1


def test_high_dimension_defaults():
    assert default_strategy(2) == "hash"
    assert default_strategy(200) == "pca"
    P = np.random.default_rng(0).random((50, 10))
    ix = build_neighbor_index(P, "hash", 0.2)
    assert not isinstance(ix, SpatialHashIndex)


def test_bad_configuration():
    with pytest.raises(ValueError):
        build_neighbor_index(np.zeros((1, 2)), "kd", 0.1)
    with pytest.raises(ValueError):
        build_neighbor_index(np.zeros((1, 2)), "hash", 0.0)
    with pytest.raises(ValueError):
        SpatialHashIndex(2, 0.1).query([0, 0], 0.2)
