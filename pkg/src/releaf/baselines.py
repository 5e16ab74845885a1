"""Comparison policies.

``GreedyReleaf`` keeps one sample mean per (type, interval, action) and, when
exploiting, picks the action owning the single highest marginal estimate.
On rewards that depend on different types for different actions this can
lock onto the wrong action forever. ``EpsilonGreedy`` is a plain contextual
epsilon-greedy over a fixed grid of the whole context cube.
"""

from __future__ import annotations

import math
import random
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import ConfigurationError, ProtocolError
from .partition import Interval, index_at_level, initial_partition
from .policy import Decision, Phase, PolicyParams, control_number


class GreedyReleaf:
    def __init__(self, n_types: int, n_actions: int, params: PolicyParams):
        if n_types < 1 or n_actions < 1:
            raise ConfigurationError("need at least one type and one action")
        self.n_types = n_types
        self.n_actions = n_actions
        self.params = params
        self.dstar = max(1, n_types - 1)
        self.rng = random.Random(params.seed)
        self.t = 1
        self.partitions = [initial_partition(i, params.l_min) for i in range(1, n_types + 1)]
        # (type_id, interval) -> [counts per action, means per action]
        self.cells: Dict[Tuple[int, Interval], Tuple[List[int], List[float]]] = {}
        self._pending = None

    def locate(self, x: Sequence[float]) -> Tuple[Interval, ...]:
        if len(x) != self.n_types:
            raise ValueError(f"context has {len(x)} entries, expected {self.n_types}")
        return tuple(part.locate(xi) for part, xi in zip(self.partitions, x))

    def marginal(self, type_id: int, p: Interval, a: int) -> Tuple[int, float]:
        slot = self.cells.get((type_id, p))
        return (0, 0.0) if slot is None else (slot[0][a], slot[1][a])

    def step(self, x: Sequence[float]) -> Decision:
        p_t = self.locate(x)
        under = set()
        for i, p in enumerate(p_t, start=1):
            need = control_number(self.t, p.length, self.params, self.dstar, self.n_actions)
            for a in range(self.n_actions):
                if self.marginal(i, p, a)[0] < need:
                    under.add(a)
        if under:
            choices = sorted(under)
            action = choices[self.rng.randrange(len(choices))]
            decision = Decision(action, True, Phase.EXPLORE, underexplored=frozenset(under), intervals=p_t)
        else:
            action, best = 0, -math.inf
            best_type: Dict[int, Tuple[int, ...]] = {}
            estimates: Dict[int, float] = {}
            for a in range(self.n_actions):
                top_i, top = 1, -math.inf
                for i, p in enumerate(p_t, start=1):
                    m = self.marginal(i, p, a)[1]
                    if m > top:
                        top_i, top = i, m
                best_type[a] = (top_i,)
                estimates[a] = top
                if top > best:
                    action, best = a, top
            decision = Decision(action, False, Phase.EXPLOIT, best_type,
                                {a: False for a in range(self.n_actions)},
                                estimates=estimates, intervals=p_t)
        self._pending = (decision, p_t)
        return decision

    def required_observations(self, decision: Decision) -> List[int]:
        return [decision.action] if decision.observe else []

    def ingest(self, decision: Decision, rewards: Optional[Mapping[int, float]] = None) -> None:
        if self._pending is None or self._pending[0] is not decision:
            raise ProtocolError("ingest must follow the step that produced the decision")
        _, p_t = self._pending
        rewards = rewards or {}
        if decision.observe:
            if decision.action not in rewards:
                raise ProtocolError(f"missing reward observation for action {decision.action}")
            a, r = decision.action, rewards[decision.action]
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"reward {r!r} outside [0, 1]")
            for i, p in enumerate(p_t, start=1):
                slot = self.cells.get((i, p))
                if slot is None:
                    slot = self.cells[(i, p)] = ([0] * self.n_actions, [0.0] * self.n_actions)
                s = slot[0][a]
                slot[1][a] = (s * slot[1][a] + r) / (s + 1)
                slot[0][a] = s + 1
        for part, p in zip(self.partitions, p_t):
            if part.record_arrival(p, self.params.rho) is not None:
                self.cells.pop((part.type_id, p), None)
        self.t += 1
        self._pending = None

    def max_level(self) -> int:
        return max(part.max_level() for part in self.partitions)


class EpsilonGreedy:
    """Explore uniformly with probability ``min(1, c / t)``; otherwise take the
    best mean in the level-``grid_level`` hypercube holding the context."""

    def __init__(self, n_types: int, n_actions: int, c: float = 1.0, grid_level: int = 2, seed: int = 0):
        if c <= 0 or grid_level < 0:
            raise ConfigurationError("epsilon-greedy needs c > 0 and grid_level >= 0")
        self.n_types = n_types
        self.n_actions = n_actions
        self.c = c
        self.grid_level = grid_level
        self.rng = random.Random(seed)
        self.t = 1
        self.cells: Dict[Tuple[int, ...], Tuple[List[int], List[float]]] = {}
        self._pending = None

    def epsilon(self, t: Optional[int] = None) -> float:
        return min(1.0, self.c / (self.t if t is None else t))

    def step(self, x: Sequence[float]) -> Decision:
        if len(x) != self.n_types:
            raise ValueError(f"context has {len(x)} entries, expected {self.n_types}")
        cell = tuple(index_at_level(xi, self.grid_level) for xi in x)
        if self.rng.random() < self.epsilon():
            action = self.rng.randrange(self.n_actions)
            decision = Decision(action, True, Phase.EXPLORE)
        else:
            means = self.cells.get(cell, (None, [0.0] * self.n_actions))[1]
            action = max(range(self.n_actions), key=lambda a: (means[a], -a))
            decision = Decision(action, True, Phase.EXPLOIT, estimates=dict(enumerate(means)))
        self._pending = (decision, cell)
        return decision

    def required_observations(self, decision: Decision) -> List[int]:
        return [decision.action]

    def ingest(self, decision: Decision, rewards: Optional[Mapping[int, float]] = None) -> None:
        if self._pending is None or self._pending[0] is not decision:
            raise ProtocolError("ingest must follow the step that produced the decision")
        rewards = rewards or {}
        if decision.action not in rewards:
            raise ProtocolError(f"missing reward observation for action {decision.action}")
        cell = self._pending[1]
        slot = self.cells.get(cell)
        if slot is None:
            slot = self.cells[cell] = ([0] * self.n_actions, [0.0] * self.n_actions)
        a = decision.action
        s = slot[0][a]
        slot[1][a] = (s * slot[1][a] + rewards[a]) / (s + 1)
        slot[0][a] = s + 1
        self.t += 1
        self._pending = None

    def max_level(self) -> int:
        return self.grid_level
