"""Adaptive dyadic partitions of [0, 1], one per context type.

An interval is identified by ``(level, index)``. A level ``l`` interval with
index ``k > 0`` covers ``(k 2^-l, (k+1) 2^-l]``; index 0 covers the closed
``[0, 2^-l]``. Each active interval carries an arrival counter and is split
into its two halves once the counter reaches ``2 ** (rho * level)``.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple


class Interval(NamedTuple):
    level: int
    index: int

    @property
    def length(self) -> float:
        return 2.0 ** -self.level

    @property
    def lower(self) -> float:
        return self.index * 2.0 ** -self.level

    @property
    def upper(self) -> float:
        return (self.index + 1) * 2.0 ** -self.level

    @property
    def center(self) -> float:
        return (self.index + 0.5) * 2.0 ** -self.level

    def contains(self, x: float) -> bool:
        return index_at_level(x, self.level) == self.index

    def children(self) -> Tuple["Interval", "Interval"]:
        return (Interval(self.level + 1, 2 * self.index),
                Interval(self.level + 1, 2 * self.index + 1))

    def parent(self) -> Optional["Interval"]:
        if self.level == 0:
            return None
        return Interval(self.level - 1, self.index // 2)

    def __str__(self) -> str:
        left = "[" if self.index == 0 else "("
        return f"{left}{self.lower:g}, {self.upper:g}]"


def index_at_level(x: float, level: int) -> int:
    """Index of the level-``level`` interval containing ``x``.

    Scaling by a power of two is exact in floating point, so boundaries
    ``x = k 2^-l`` land in the interval to their left, as required by the
    half-open convention.
    """
    k = math.ceil(x * (1 << level)) - 1
    return k if k > 0 else 0


def split_threshold(level: int, rho: float) -> float:
    return 2.0 ** (rho * level)


def epsilon_min_level(lipschitz: float, epsilon: float) -> int:
    """Initial level guaranteeing epsilon-optimal exploitation.

    ``ceil(log2(3 L / (2 eps)))``, clipped at zero.
    """
    if lipschitz <= 0 or epsilon <= 0:
        raise ValueError("lipschitz and epsilon must be positive")
    return max(0, math.ceil(math.log2(3.0 * lipschitz / (2.0 * epsilon))))


class TypePartition:
    """Live intervals of one context type and their arrival counters."""

    def __init__(self, type_id: int, counters: Dict[Interval, int], min_level: int = 0):
        self.type_id = type_id
        self.counters = counters
        self.min_level = min_level
        # intervals ordered along [0, 1] with their right endpoints, for bisection
        self._order = sorted(counters, key=lambda p: p.upper)
        self._uppers = [p.upper for p in self._order]

    @property
    def active(self) -> List[Interval]:
        return list(self._order)

    def __len__(self) -> int:
        return len(self.counters)

    def __contains__(self, p: Interval) -> bool:
        return p in self.counters

    def max_level(self) -> int:
        return max(p.level for p in self.counters)

    def locate(self, x: float) -> Interval:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"context value {x!r} outside [0, 1]")
        # first interval whose right end is >= x: right-closed convention
        return self._order[bisect_left(self._uppers, x)]

    def record_arrival(self, p: Interval, rho: float) -> Optional[Tuple[Interval, Interval]]:
        """Count one arrival to ``p``; split it when the threshold is reached.

        Returns the two children on a split. The caller is responsible for
        dropping statistics that reference ``p``.
        """
        counters = self.counters
        try:
            n = counters[p] + 1
        except KeyError:
            raise LookupError(f"{p} is not active in the partition of type {self.type_id}") from None
        if n >= 2.0 ** (rho * p.level):
            del counters[p]
            left, right = p.children()
            counters[left] = 0
            counters[right] = 0
            k = bisect_left(self._uppers, p.upper)
            self._order[k:k + 1] = [left, right]
            self._uppers[k:k + 1] = [left.upper, right.upper]
            return left, right
        counters[p] = n
        return None

    def dump(self) -> List[Tuple[int, int, int, int]]:
        """``(type_id, level, index, counter)`` rows in sorted order."""
        return [(self.type_id, p.level, p.index, self.counters[p]) for p in sorted(self.counters)]

    def copy(self) -> "TypePartition":
        return TypePartition(self.type_id, dict(self.counters), self.min_level)


def initial_partition(type_id: int, l_min: int = 0) -> TypePartition:
    if l_min < 0:
        raise ValueError("l_min must be nonnegative")
    counters = {Interval(l_min, k): 0 for k in range(1 << l_min)}
    return TypePartition(type_id, counters, l_min)


def check_cover(intervals: Iterable[Interval]) -> bool:
    """True when the intervals are disjoint and their union is [0, 1]."""
    ordered = sorted(intervals, key=lambda p: (p.lower, p.level))
    if not ordered:
        return False
    edge = 0.0
    for p in ordered:
        if p.lower != edge:
            return False
        edge = p.upper
    return edge == 1.0
