"""RELEAF decision core.

Per step the policy locates the context in every type's partition, checks
whether each action has enough observations on every tuple of intervals
active at that context, and either explores an under-observed action or
exploits. Exploitation estimates, for each action, which ``gamma_rel`` types
drive its reward (the tuple whose pairwise estimates vary least) and ranks
actions by the count-weighted mean over the tuples containing it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .errors import ConfigurationError, ProtocolError
from .partition import Interval, initial_partition
from .stats import StatsStore, TupleKey, check_relevance_dimension, type_tuples


class FeedbackMode(Enum):
    EXPLORE_ONLY = "explore_only"
    ALL_STEPS = "all_steps"
    FULL_OBSERVATION = "full_observation"


class Phase(Enum):
    EXPLORE = "explore"
    EXPLOIT = "exploit"


@dataclass(frozen=True)
class PolicyParams:
    L: float = 1.0
    rho: float = 2 + 2 * math.sqrt(2)
    delta: float = 0.1
    gamma_rel: int = 1
    c_O: float = 0.0
    kappa: float = 1.0
    l_min: int = 0
    feedback_mode: FeedbackMode = FeedbackMode.EXPLORE_ONLY
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.feedback_mode, str):
            try:
                mode = FeedbackMode(self.feedback_mode)
            except ValueError:
                names = ", ".join(m.value for m in FeedbackMode)
                raise ConfigurationError(f"unknown feedback_mode {self.feedback_mode!r} (expected one of {names})") from None
            object.__setattr__(self, "feedback_mode", mode)
        if not self.L > 0:
            raise ConfigurationError("L must be positive")
        if not self.rho > 0:
            raise ConfigurationError("rho must be positive")
        if not 0 < self.delta < 1:
            raise ConfigurationError("delta must lie in (0, 1)")
        if int(self.gamma_rel) != self.gamma_rel or self.gamma_rel < 1:
            raise ConfigurationError("gamma_rel must be a positive integer")
        if self.c_O < 0:
            raise ConfigurationError("c_O must be nonnegative")
        if not self.kappa > 0:
            raise ConfigurationError("kappa must be positive")
        if int(self.l_min) != self.l_min or self.l_min < 0:
            raise ConfigurationError("l_min must be a nonnegative integer")


@dataclass
class Decision:
    action: int
    observe: bool
    phase: Phase
    estimated_relevant: Optional[Dict[int, Tuple[int, ...]]] = None
    rel_empty_fallback: Optional[Dict[int, bool]] = None
    # diagnostics, kept for replay checks and logging
    underexplored: FrozenSet[int] = frozenset()
    candidates: Optional[Dict[int, List[Tuple[int, ...]]]] = None
    variations: Optional[Dict[int, Dict[Tuple[int, ...], float]]] = None
    estimates: Optional[Dict[int, float]] = None
    intervals: Tuple[Interval, ...] = field(default=(), repr=False)


def d_star(n_types: int, gamma_rel: int) -> int:
    """Number of ``2 gamma_rel``-tuples of types that contain a given type."""
    check_relevance_dimension(n_types, gamma_rel)
    return math.comb(n_types - 1, 2 * gamma_rel - 1)


def control_number(t: int, length: float, params: PolicyParams, dstar: int, n_actions: int) -> float:
    """Observations required per tuple of intervals before exploiting.

    ``2 ln(t D* |A| / delta) / (L s)^2``, divided by ``kappa`` and floored at 1.
    """
    raw = 2.0 * math.log(t * dstar * n_actions / params.delta) / (params.L * length) ** 2
    return max(1.0, raw / params.kappa)


class Releaf:
    """Stateful RELEAF policy over ``n_types`` context types and ``n_actions`` actions.

    Call :meth:`step` with a context, then :meth:`ingest` with the rewards
    named by :meth:`required_observations`.
    """

    def __init__(self, n_types: int, n_actions: int, params: PolicyParams):
        check_relevance_dimension(n_types, params.gamma_rel)
        if n_actions < 1:
            raise ConfigurationError("need at least one action")
        self.n_types = n_types
        self.n_actions = n_actions
        self.params = params
        self.dstar = d_star(n_types, params.gamma_rel)
        self.rng = random.Random(params.seed)
        self.t = 1
        self.partitions = [initial_partition(i, params.l_min) for i in range(1, n_types + 1)]
        self.store = StatsStore(n_actions)

        g = params.gamma_rel
        self.wide_tuples = type_tuples(n_types, 2 * g)
        self.narrow_tuples = type_tuples(n_types, g)
        # for each narrow tuple v, indices of the wide tuples w that contain v
        self.supersets = [
            [k for k, w in enumerate(self.wide_tuples) if set(v) <= set(w)]
            for v in self.narrow_tuples
        ]
        self._narrow_index = {v: k for k, v in enumerate(self.narrow_tuples)}
        self._all_actions = frozenset(range(n_actions))
        self._rel_scale = 3.0 * params.L * math.sqrt(g)
        self._pending: Optional[Tuple[Decision, Tuple[Interval, ...], List[TupleKey]]] = None

    # -- per-context views -------------------------------------------------

    def locate(self, x: Sequence[float]) -> Tuple[Interval, ...]:
        if len(x) != self.n_types:
            raise ValueError(f"context has {len(x)} entries, expected {self.n_types}")
        return tuple([part.locate(xi) for part, xi in zip(self.partitions, x)])

    def keys_for(self, p_t: Sequence[Interval]) -> List[TupleKey]:
        new = tuple.__new__
        return [new(TupleKey, (w, tuple([p_t[i - 1] for i in w]))) for w in self.wide_tuples]

    def control_numbers(self, p_t: Sequence[Interval], t: Optional[int] = None) -> List[float]:
        """Control number of each type (index ``i - 1`` for type ``i``)."""
        t = self.t if t is None else t
        by_level: Dict[int, float] = {}
        out = []
        for p in p_t:
            c = by_level.get(p.level)
            if c is None:
                c = by_level[p.level] = control_number(t, p.length, self.params, self.dstar, self.n_actions)
            out.append(c)
        return out

    def _slots(self, keys: List[TupleKey]):
        get = self.store.cells.get
        return [get(k) for k in keys]

    def _underexplored(self, p_t, slots, t=None) -> FrozenSet[int]:
        if None in slots:
            return self._all_actions
        ctrl = self.control_numbers(p_t, t)
        under = set()
        # a key sits in Q_i for each of its types, so it must clear the largest of their numbers
        for w, slot in zip(self.wide_tuples, slots):
            need = max([ctrl[i - 1] for i in w])
            counts = slot[0]
            for a in range(self.n_actions):
                if counts[a] < need:
                    under.add(a)
        return frozenset(under)

    def underexplored(self, p_t: Sequence[Interval], t: Optional[int] = None) -> FrozenSet[int]:
        return self._underexplored(p_t, self._slots(self.keys_for(p_t)), t)

    def _limits(self, p_t) -> List[float]:
        """Relevance threshold of each narrow tuple at the current intervals."""
        lengths = [p.length for p in p_t]
        scale = self._rel_scale
        return [scale * max([lengths[i - 1] for i in v]) for v in self.narrow_tuples]

    def _variations(self, p_t, slots, a, limits=None) -> List[Tuple[Tuple[int, ...], float, bool]]:
        limits = self._limits(p_t) if limits is None else limits
        means = [0.0 if slot is None else slot[1][a] for slot in slots]
        rows = []
        for v, members, limit in zip(self.narrow_tuples, self.supersets, limits):
            vals = [means[k] for k in members]
            var = max(vals) - min(vals)
            rows.append((v, var, var <= limit))
        return rows

    def relevant_candidates(self, p_t: Sequence[Interval], a: int) -> List[Tuple[int, ...]]:
        slots = self._slots(self.keys_for(p_t))
        return [v for v, _, ok in self._variations(p_t, slots, a) if ok]

    def variation(self, p_t: Sequence[Interval], v: Tuple[int, ...], a: int) -> float:
        slots = self._slots(self.keys_for(p_t))
        members = self.supersets[self.narrow_tuples.index(tuple(v))]
        vals = [0.0 if slots[k] is None else slots[k][1][a] for k in members]
        return max(vals) - min(vals)

    def _choose_relevant(self, rows, rng: random.Random) -> Tuple[Tuple[int, ...], bool]:
        best = None
        best_var = math.inf
        for v, var, ok in rows:
            if ok and var < best_var:
                best, best_var = v, var
        if best is None:
            return self.narrow_tuples[rng.randrange(len(self.narrow_tuples))], True
        return best, False

    def estimated_relevant(self, p_t: Sequence[Interval], a: int,
                           rng: Optional[random.Random] = None) -> Tuple[Tuple[int, ...], bool]:
        """``(c_hat, fallback)``: least-variation candidate, or a random tuple if none qualify."""
        slots = self._slots(self.keys_for(p_t))
        return self._choose_relevant(self._variations(p_t, slots, a), self.rng if rng is None else rng)

    def _aggregate(self, slots, c_hat, a) -> float:
        total = 0
        weighted = 0.0
        for k in self.supersets[self._narrow_index[c_hat]]:
            slot = slots[k]
            if slot is not None:
                s = slot[0][a]
                total += s
                weighted += slot[1][a] * s
        if total == 0:
            raise RuntimeError("aggregate mean over tuples with no observations")
        return weighted / total

    def aggregate_mean(self, p_t: Sequence[Interval], c_hat: Tuple[int, ...], a: int) -> float:
        return self._aggregate(self._slots(self.keys_for(p_t)), tuple(c_hat), a)

    # -- the loop ----------------------------------------------------------

    def step(self, x: Sequence[float]) -> Decision:
        p_t = self.locate(x)
        keys = self.keys_for(p_t)
        slots = self._slots(keys)
        under = self._underexplored(p_t, slots)
        if under:
            choices = sorted(under)
            action = choices[self.rng.randrange(len(choices))]
            decision = Decision(action, True, Phase.EXPLORE, underexplored=under, intervals=p_t)
        else:
            c_hat: Dict[int, Tuple[int, ...]] = {}
            fallback: Dict[int, bool] = {}
            candidates: Dict[int, List[Tuple[int, ...]]] = {}
            variations: Dict[int, Dict[Tuple[int, ...], float]] = {}
            estimates: Dict[int, float] = {}
            action = 0
            best = -math.inf
            limits = self._limits(p_t)
            for a in range(self.n_actions):
                rows = self._variations(p_t, slots, a, limits)
                candidates[a] = [v for v, _, ok in rows if ok]
                variations[a] = {v: var for v, var, ok in rows if ok}
                c_hat[a], fallback[a] = self._choose_relevant(rows, self.rng)
                estimates[a] = self._aggregate(slots, c_hat[a], a)
                if estimates[a] > best:
                    action, best = a, estimates[a]
            observe = self.params.feedback_mode is FeedbackMode.ALL_STEPS
            decision = Decision(action, observe, Phase.EXPLOIT, c_hat, fallback, under,
                                candidates, variations, estimates, p_t)
        self._pending = (decision, p_t, keys)
        return decision

    def required_observations(self, decision: Decision) -> List[int]:
        """Actions whose rewards :meth:`ingest` needs for ``decision``."""
        if not decision.observe:
            return []
        if decision.phase is Phase.EXPLORE and self.params.feedback_mode is FeedbackMode.FULL_OBSERVATION:
            return list(range(self.n_actions))
        return [decision.action]

    def ingest(self, decision: Decision, rewards: Optional[Mapping[int, float]] = None) -> List[Tuple[int, Interval]]:
        """Apply observations, count arrivals, split, and advance ``t``.

        Returns the ``(type_id, interval)`` pairs that were split.
        """
        if self._pending is None or self._pending[0] is not decision:
            raise ProtocolError("ingest must follow the step that produced the decision")
        _, p_t, keys = self._pending
        rewards = rewards or {}
        needed = self.required_observations(decision)
        missing = [a for a in needed if a not in rewards]
        if missing:
            raise ProtocolError(f"missing reward observations for actions {missing}")
        store = self.store
        for a in needed:
            r = rewards[a]
            for key in keys:
                store.update(key, a, r)
        split = []
        rho = self.params.rho
        for part, p in zip(self.partitions, p_t):
            if part.record_arrival(p, rho) is not None:
                store.prune(part.type_id, p)
                split.append((part.type_id, p))
        self.t += 1
        self._pending = None
        return split

    def snapshot(self) -> dict:
        return {
            "t": self.t,
            "partitions": [row for part in self.partitions for row in part.dump()],
            "live_cells": self.store.live_cells(),
        }

    def max_level(self) -> int:
        return max(part.max_level() for part in self.partitions)
