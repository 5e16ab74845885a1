import math

import pytest
from hypothesis import given, settings, strategies as st

from releaf.environments import WorstCaseArrivals
from releaf.partition import (Interval, check_cover, epsilon_min_level, index_at_level,
                              initial_partition)


def test_initial_partition_level_zero():
    part = initial_partition(1, 0)
    assert part.active == [Interval(0, 0)]
    assert part.counters == {Interval(0, 0): 0}


def test_initial_partition_level_two():
    part = initial_partition(1, 2)
    assert part.active == [Interval(2, k) for k in range(4)]
    assert check_cover(part.active)
    assert all(n == 0 for n in part.counters.values())


def test_initial_partition_from_epsilon():
    # ceil(log2(3 * 1 / (2 * 0.1))) = ceil(log2 15) = ceil(3.907) = 4
    assert math.log2(15) == pytest.approx(3.9068905956085187)
    level = epsilon_min_level(1.0, 0.1)
    assert level == 4
    assert len(initial_partition(1, level)) == 16


def test_initial_partition_rejects_negative_level():
    with pytest.raises(ValueError):
        initial_partition(1, -1)


@pytest.mark.parametrize("x, expected", [
    (0.3, Interval(2, 1)),
    (0.25, Interval(2, 0)),
    (0.0, Interval(2, 0)),
    (1.0, Interval(2, 3)),
    (0.5, Interval(2, 1)),
    (0.5000001, Interval(2, 2)),
])
def test_locate_boundary_convention(x, expected):
    assert initial_partition(1, 2).locate(x) == expected


@pytest.mark.parametrize("x", [-0.01, 1.01, float("nan")])
def test_locate_rejects_outside(x):
    with pytest.raises(ValueError):
        initial_partition(1, 0).locate(x)


def test_interval_geometry():
    p = Interval(2, 1)
    assert (p.lower, p.upper, p.length, p.center) == (0.25, 0.5, 0.25, 0.375)
    assert p.contains(0.5) and not p.contains(0.25)
    assert Interval(2, 0).contains(0.0)
    assert p.children() == (Interval(3, 2), Interval(3, 3))
    assert p.parent() == Interval(1, 0)
    assert str(Interval(1, 0)) == "[0, 0.5]" and str(p) == "(0.25, 0.5]"


def test_split_threshold_level_one_rho_two():
    part = initial_partition(1, 1)
    p = Interval(1, 0)
    for _ in range(3):
        assert part.record_arrival(p, 2.0) is None
    assert part.counters[p] == 3
    children = part.record_arrival(p, 2.0)
    assert children == (Interval(2, 0), Interval(2, 1))
    assert p not in part
    assert part.counters[Interval(2, 0)] == 0 and part.counters[Interval(2, 1)] == 0
    assert check_cover(part.active)


def test_level_zero_splits_on_first_arrival():
    part = initial_partition(1, 0)
    assert part.record_arrival(Interval(0, 0), 2.0) == (Interval(1, 0), Interval(1, 1))


def test_split_threshold_balanced_rho():
    rho = 2 + 2 * math.sqrt(2)
    threshold = 2 ** rho
    assert threshold == pytest.approx(28.41197, abs=1e-4)
    assert math.ceil(threshold) == 29
    part = initial_partition(1, 1)
    p = Interval(1, 1)
    for k in range(28):
        assert part.record_arrival(p, rho) is None, k
    assert part.record_arrival(p, rho) is not None


def test_record_arrival_inactive_interval():
    part = initial_partition(1, 0)
    with pytest.raises(LookupError):
        part.record_arrival(Interval(1, 0), 2.0)


def test_index_at_level_exact_on_dyadic_points():
    for level in range(12):
        for k in range(1 << min(level, 6)):
            edge = (k + 1) / (1 << level)
            assert index_at_level(edge, level) == k


def _drive(xs, rho, l_min=0):
    part = initial_partition(1, l_min)
    history = []
    for x in xs:
        p = part.locate(x)
        part.record_arrival(p, rho)
        history.append(tuple(part.active))
    return part, history


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=200),
       st.floats(0.5, 4.0), st.integers(0, 3))
def test_cover_and_counter_invariants(xs, rho, l_min):
    part, history = _drive(xs, rho, l_min)
    assert check_cover(part.active)
    assert sum(p.length for p in part.active) == pytest.approx(1.0)
    for p, n in part.counters.items():
        assert n < 2.0 ** (rho * p.level)
    # replaying the same arrivals reproduces the same partition sequence
    assert _drive(xs, rho, l_min)[1] == history


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=150), st.floats(0.5, 3.0), st.floats(0, 1))
def test_monotone_refinement(xs, rho, probe):
    part = initial_partition(1, 0)
    last = 0
    for x in xs:
        part.record_arrival(part.locate(x), rho)
        level = part.locate(probe).level
        assert level >= last
        last = level


@pytest.mark.parametrize("rho", [1.0, 2.0, 3.0, 2 + 2 * math.sqrt(2)])
def test_worst_case_level_cap(rho):
    # every lower level is exhausted before a context lands in a deeper interval,
    # so the level receiving arrivals stays below 1 + log2(T) / (1 + rho)
    arrivals = WorstCaseArrivals(rho, 1)
    part = initial_partition(1, 0)
    deepest = 0
    for T in range(1, 5001):
        p = part.locate(arrivals.context_at(T))
        deepest = max(deepest, p.level)
        assert deepest < 1 + math.log2(T) / (1 + rho)
        part.record_arrival(p, rho)


@pytest.mark.parametrize("rho", [2.0, 2 + 2 * math.sqrt(2)])
def test_worst_case_schedule_matches_partition(rho):
    # the emitted center always falls in an active interval of the emitted level
    arrivals = WorstCaseArrivals(rho, 1)
    part = initial_partition(1, 0)
    level = 0
    for t in range(1, 3001):
        x = arrivals.context_at(t)
        p = part.locate(x)
        assert p.center == x
        assert p.level >= level
        level = p.level
        part.record_arrival(p, rho)
    assert level >= 2
