"""Sample-mean statistics keyed by tuples of intervals.

Every observation of an action updates one cell per tuple of types: the cell
addressed by the types, the intervals those types' contexts currently fall
in, and the action. Cells that reference an interval are dropped as soon as
that interval is split, so children always start from zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, NamedTuple, Sequence, Set, Tuple

from .errors import ConfigurationError
from .partition import Interval


class TupleKey(NamedTuple):
    types: Tuple[int, ...]
    intervals: Tuple[Interval, ...]


@dataclass(frozen=True)
class StatCell:
    count: int
    mean: float


def type_tuples(n_types: int, size: int) -> List[Tuple[int, ...]]:
    """All strictly increasing ``size``-tuples of type ids ``1..n_types``."""
    return list(combinations(range(1, n_types + 1), size))


def check_relevance_dimension(n_types: int, gamma_rel: int) -> None:
    if gamma_rel < 1:
        raise ConfigurationError("gamma_rel must be a positive integer")
    if n_types <= 2 * gamma_rel:
        raise ConfigurationError(
            f"relevance dimension too large for D: need D >= {2 * gamma_rel + 1}, got D = {n_types}")


def tuple_keys(p_t: Sequence[Interval], gamma_rel: int
               ) -> Tuple[List[TupleKey], Dict[int, List[TupleKey]]]:
    """Keys active for the current intervals ``p_t`` (``p_t[i - 1]`` is type ``i``).

    Returns the full list ``Q_t`` and, per type, the keys containing it.
    """
    n_types = len(p_t)
    check_relevance_dimension(n_types, gamma_rel)
    keys = []
    by_type: Dict[int, List[TupleKey]] = {i: [] for i in range(1, n_types + 1)}
    for types in type_tuples(n_types, 2 * gamma_rel):
        key = TupleKey(types, tuple(p_t[i - 1] for i in types))
        keys.append(key)
        for i in types:
            by_type[i].append(key)
    return keys, by_type


def canonical_key(types: Sequence[int], intervals: Sequence[Interval]) -> TupleKey:
    """Sort a (types, intervals) pairing by type so (i, j) and (j, i) coincide."""
    if len(types) != len(intervals):
        raise ValueError("types and intervals must have equal length")
    if len(set(types)) != len(types):
        raise ValueError("types in a tuple key must be distinct")
    pairs = sorted(zip(types, intervals))
    return TupleKey(tuple(i for i, _ in pairs), tuple(p for _, p in pairs))


class StatsStore:
    """Hash-keyed counts and sample means, one slot per action for each key."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        # key -> [counts per action, means per action]
        self.cells: Dict[TupleKey, Tuple[List[int], List[float]]] = {}
        self._by_interval: Dict[Tuple[int, Interval], Set[TupleKey]] = {}

    def __len__(self) -> int:
        return len(self.cells)

    def live_cells(self) -> int:
        return sum(1 for counts, _ in self.cells.values() for s in counts if s > 0)

    def get(self, key: TupleKey, a: int) -> StatCell:
        slot = self.cells.get(key)
        if slot is None:
            return StatCell(0, 0.0)
        return StatCell(slot[0][a], slot[1][a])

    def _slot(self, key: TupleKey) -> Tuple[List[int], List[float]]:
        slot = self.cells.get(key)
        if slot is None:
            slot = ([0] * self.n_actions, [0.0] * self.n_actions)
            self.cells[key] = slot
            index = self._by_interval
            for i, p in zip(key.types, key.intervals):
                index.setdefault((i, p), set()).add(key)
        return slot

    def update(self, key: TupleKey, a: int, reward: float) -> None:
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"reward {reward!r} outside [0, 1]")
        counts, means = self._slot(key)
        s = counts[a]
        means[a] = (s * means[a] + reward) / (s + 1)
        counts[a] = s + 1

    def prune(self, type_id: int, old: Interval) -> int:
        """Drop every cell whose key uses ``old`` for ``type_id``; return how many keys went."""
        doomed = self._by_interval.pop((type_id, old), ())
        for key in doomed:
            del self.cells[key]
            for i, p in zip(key.types, key.intervals):
                if i != type_id:
                    peers = self._by_interval.get((i, p))
                    if peers is not None:
                        peers.discard(key)
                        if not peers:
                            del self._by_interval[(i, p)]
        return len(doomed)

    def dump(self) -> str:
        """Sorted text snapshot: types, intervals, action, count, mean."""
        lines = []
        for key in sorted(self.cells):
            counts, means = self.cells[key]
            ivs = " ".join(f"{p.level}:{p.index}" for p in key.intervals)
            types = ",".join(map(str, key.types))
            for a in range(self.n_actions):
                if counts[a]:
                    lines.append(f"{types}\t{ivs}\t{a}\t{counts[a]}\t{means[a]:.17g}")
        return "\n".join(lines)


def update_stats(store: StatsStore, key: TupleKey, a: int, reward: float) -> None:
    store.update(key, a, reward)


def get_stats(store: StatsStore, key: TupleKey, a: int) -> StatCell:
    return store.get(key, a)


def prune_on_split(store: StatsStore, type_id: int, old_interval: Interval,
                   new_children: Tuple[Interval, Interval] = ()) -> None:
    # children need no entries: absent keys read as (0, 0)
    store.prune(type_id, old_interval)
