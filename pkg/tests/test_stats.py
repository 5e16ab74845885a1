import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from releaf.errors import ConfigurationError
from releaf.partition import Interval
from releaf.stats import (StatCell, StatsStore, TupleKey, canonical_key, get_stats,
                          prune_on_split, tuple_keys, update_stats)

P0 = Interval(0, 0)
L1 = Interval(1, 0)
R1 = Interval(1, 1)


def test_tuple_keys_three_types_pairs():
    keys, by_type = tuple_keys([P0, L1, R1], 1)
    assert [k.types for k in keys] == [(1, 2), (1, 3), (2, 3)]
    assert [k.types for k in by_type[1]] == [(1, 2), (1, 3)]
    assert keys[1].intervals == (P0, R1)


def test_tuple_keys_five_types_quadruples():
    keys, by_type = tuple_keys([P0] * 5, 2)
    assert len(keys) == math.comb(5, 4) == 5
    assert all(len(v) == math.comb(4, 3) for v in by_type.values())


@pytest.mark.parametrize("n_types, gamma", [(4, 2), (2, 1), (1, 1)])
def test_tuple_keys_dimension_error(n_types, gamma):
    with pytest.raises(ConfigurationError, match="relevance dimension too large"):
        tuple_keys([P0] * n_types, gamma)


def test_update_incremental_mean():
    store = StatsStore(2)
    key = TupleKey((1, 2), (P0, P0))
    for r in (0.5, 0.5, 0.5):
        update_stats(store, key, 0, r)
    update_stats(store, key, 0, 0.9)
    cell = get_stats(store, key, 0)
    assert cell.count == 4 and cell.mean == pytest.approx(0.6, abs=1e-15)
    assert get_stats(store, key, 1) == StatCell(0, 0.0)


def test_first_observation():
    store = StatsStore(1)
    key = TupleKey((1, 2), (P0, P0))
    update_stats(store, key, 0, 0.7)
    assert get_stats(store, key, 0) == StatCell(1, 0.7)


@pytest.mark.parametrize("r", [-0.1, 1.1, float("nan")])
def test_update_rejects_rewards_outside_unit_interval(r):
    with pytest.raises(ValueError):
        update_stats(StatsStore(1), TupleKey((1, 2), (P0, P0)), 0, r)


def test_untouched_key_reads_zero():
    assert get_stats(StatsStore(3), TupleKey((2, 3), (L1, R1)), 2) == StatCell(0, 0.0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=300))
def test_mean_matches_exact_arithmetic(rewards):
    store = StatsStore(1)
    key = TupleKey((1, 2), (P0, P0))
    for r in rewards:
        store.update(key, 0, r)
    exact = sum(Fraction(r) for r in rewards) / len(rewards)
    cell = store.get(key, 0)
    assert cell.count == len(rewards)
    assert abs(cell.mean - float(exact)) <= 1e-12
    assert min(rewards) - 1e-15 <= cell.mean <= max(rewards) + 1e-15


def test_prune_removes_only_referencing_cells():
    store = StatsStore(2)
    doomed = [TupleKey((1, 2), (L1, P0)), TupleKey((1, 3), (L1, P0)), TupleKey((1, 3), (L1, R1))]
    kept = [TupleKey((1, 2), (R1, P0)), TupleKey((2, 3), (L1, L1))]
    for k in doomed + kept:
        store.update(k, 0, 0.4)
    prune_on_split(store, 1, L1, L1.children())
    assert all(store.get(k, 0) == StatCell(0, 0.0) for k in doomed)
    assert all(store.get(k, 0) == StatCell(1, 0.4) for k in kept)
    assert len(store) == 2
    # a child key begins empty
    child = TupleKey((1, 2), (Interval(2, 0), P0))
    assert store.get(child, 1) == StatCell(0, 0.0)


def test_prune_keeps_index_consistent():
    store = StatsStore(1)
    k = TupleKey((1, 2), (L1, R1))
    store.update(k, 0, 0.2)
    assert store.prune(2, R1) == 1
    assert store.prune(1, L1) == 0
    store.update(k, 0, 0.6)
    assert store.get(k, 0) == StatCell(1, 0.6)


def test_canonical_key_order_independent():
    store = StatsStore(1)
    store.update(canonical_key((3, 1), (R1, L1)), 0, 0.25)
    assert store.get(canonical_key((1, 3), (L1, R1)), 0) == StatCell(1, 0.25)
    with pytest.raises(ValueError):
        canonical_key((1, 1), (L1, R1))


def test_dump_is_sorted_and_skips_empty_slots():
    store = StatsStore(2)
    store.update(TupleKey((2, 3), (P0, P0)), 1, 0.5)
    store.update(TupleKey((1, 2), (L1, P0)), 0, 0.25)
    assert store.dump().splitlines() == ["1,2\t1:0 0:0\t0\t1\t0.25", "2,3\t0:0 0:0\t1\t1\t0.5"]
    assert store.live_cells() == 2
