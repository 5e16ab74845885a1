"""Synthetic environments with a known relevance relation.

Each action's expected reward depends only on the contexts of its relevant
types, through a mean function from a small Lipschitz family. Rewards are
drawn from noise families supported on [0, 1] with exactly that mean.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import ConfigurationError


# -- mean functions over the relevant coordinates ---------------------------

@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, x_rel: Sequence[float]) -> float:
        return self.value

    @property
    def lipschitz(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Identity:
    """``x_rel[coord]``, or ``1 - x_rel[coord]`` when ``flip`` is set."""

    coord: int = 0
    flip: bool = False

    def __call__(self, x_rel: Sequence[float]) -> float:
        x = x_rel[self.coord]
        return 1.0 - x if self.flip else x

    @property
    def lipschitz(self) -> float:
        return 1.0


@dataclass(frozen=True)
class PiecewiseLinear:
    """Linear interpolation through ``(knots[k], values[k])`` on one coordinate."""

    knots: Tuple[float, ...]
    values: Tuple[float, ...]
    coord: int = 0

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.knots) != len(self.values) or len(self.knots) < 2:
            raise ConfigurationError("piecewise-linear needs matching knots/values, at least two")
        if self.knots[0] != 0.0 or self.knots[-1] != 1.0:
            raise ConfigurationError("piecewise-linear knots must start at 0 and end at 1")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ConfigurationError("piecewise-linear knots must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ConfigurationError("piecewise-linear values must lie in [0, 1]")

    def __call__(self, x_rel: Sequence[float]) -> float:
        x = x_rel[self.coord]
        k = min(max(bisect.bisect_right(self.knots, x) - 1, 0), len(self.knots) - 2)
        x0, x1 = self.knots[k], self.knots[k + 1]
        y0, y1 = self.values[k], self.values[k + 1]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    @property
    def lipschitz(self) -> float:
        k, v = self.knots, self.values
        return max(abs(v[i + 1] - v[i]) / (k[i + 1] - k[i]) for i in range(len(k) - 1))


@dataclass(frozen=True)
class WeightedSum:
    """``sum_k w_k f_k(x_rel)`` for nonnegative weights summing to at most 1."""

    terms: Tuple[Tuple[float, "MeanFn"], ...]

    def __post_init__(self):
        if any(w < 0 for w, _ in self.terms) or sum(w for w, _ in self.terms) > 1 + 1e-12:
            raise ConfigurationError("weighted-sum weights must be nonnegative with sum <= 1")

    def __call__(self, x_rel: Sequence[float]) -> float:
        return min(1.0, sum(w * f(x_rel) for w, f in self.terms))

    @property
    def lipschitz(self) -> float:
        # Cauchy-Schwarz over per-coordinate contributions
        per_coord: Dict[int, float] = {}
        for w, f in self.terms:
            c = getattr(f, "coord", None)
            if c is None:
                continue
            per_coord[c] = per_coord.get(c, 0.0) + w * f.lipschitz
        return math.sqrt(sum(v * v for v in per_coord.values()))


MeanFn = Union[Constant, Identity, PiecewiseLinear, WeightedSum]


# -- reward noise ------------------------------------------------------------

@dataclass(frozen=True)
class Bernoulli:
    def sample(self, mean: float, rng: random.Random) -> float:
        return 1.0 if rng.random() < mean else 0.0


@dataclass(frozen=True)
class TruncatedUniform:
    """Uniform on ``[mean - h, mean + h]``, ``h = min(width / 2, mean, 1 - mean)``.

    Shrinking the half-width symmetrically keeps the support inside [0, 1]
    without moving the mean. Width 0 returns the mean itself.
    """

    width: float = 0.0

    def sample(self, mean: float, rng: random.Random) -> float:
        h = min(self.width / 2.0, mean, 1.0 - mean)
        if h <= 0.0:
            return mean
        return min(1.0, max(0.0, mean + h * (2.0 * rng.random() - 1.0)))


Noise = Union[Bernoulli, TruncatedUniform]


# -- context arrivals --------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    def sample(self, rng: random.Random) -> float:
        return rng.random()


@dataclass(frozen=True)
class Discrete:
    values: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise ConfigurationError("discrete marginal needs matching values and probs")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ConfigurationError("discrete atoms must lie in [0, 1]")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
            raise ConfigurationError("discrete probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "_cum", tuple(accumulate(self.probs)))

    def sample(self, rng: random.Random) -> float:
        if len(self.values) == 1:
            return self.values[0]
        k = bisect.bisect_right(self._cum, rng.random() * self._cum[-1])
        return self.values[min(k, len(self.values) - 1)]


Marginal = Union[Uniform, Discrete]


@dataclass(frozen=True)
class IIDArrivals:
    """Independent draws per type from its marginal."""

    marginals: Tuple[Marginal, ...]

    def sample(self, rng: random.Random, t: int) -> List[float]:
        return [m.sample(rng) for m in self.marginals]


@dataclass(frozen=True)
class WorstCaseArrivals:
    """Deterministic fill-before-split arrivals.

    Every type receives the same sequence: the centre of each level-``l``
    interval ``ceil(2^(rho l))`` times in a row, interval by interval, before
    any level ``l + 1`` centre. Starting at ``start_level`` matches a policy
    whose partitions begin at that level.
    """

    rho: float
    n_types: int
    start_level: int = 0

    def context_at(self, t: int) -> float:
        if t < 1:
            raise ValueError("t is 1-based")
        rem = t - 1
        level = self.start_level
        while True:
            reps = math.ceil(2.0 ** (self.rho * level))
            block = reps << level
            if rem < block:
                k = rem // reps
                return (k + 0.5) / (1 << level)
            rem -= block
            level += 1

    def sample(self, rng: random.Random, t: int) -> List[float]:
        x = self.context_at(t)
        return [x] * self.n_types


Arrivals = Union[IIDArrivals, WorstCaseArrivals]


# -- environment -------------------------------------------------------------

@dataclass(frozen=True)
class StepOutcome:
    context: Tuple[float, ...]
    means: Tuple[float, ...]
    optimal_action: int
    optimal_mean: float


@dataclass(frozen=True)
class EnvironmentSpec:
    """Ground truth for a synthetic run. Actions are indexed ``0..|A|-1``;
    types are ``1..D`` and ``relevance[a]`` lists action ``a``'s types."""

    n_types: int
    actions: Tuple[str, ...]
    relevance: Tuple[Tuple[int, ...], ...]
    mean_fns: Tuple[MeanFn, ...]
    noise: Noise = field(default_factory=Bernoulli)
    arrivals: Arrivals = None
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.arrivals is None:
            object.__setattr__(self, "arrivals", IIDArrivals((Uniform(),) * self.n_types))
        n = len(self.actions)
        if n < 1 or len(self.relevance) != n or len(self.mean_fns) != n:
            raise ConfigurationError("actions, relevance and mean_fns must have equal, nonzero length")
        for a, rel in enumerate(self.relevance):
            if list(rel) != sorted(set(rel)) or any(not 1 <= i <= self.n_types for i in rel):
                raise ConfigurationError(f"relevance of {self.actions[a]!r} must be sorted distinct types in 1..D")
        if isinstance(self.arrivals, IIDArrivals) and len(self.arrivals.marginals) != self.n_types:
            raise ConfigurationError("one arrival marginal per type is required")
        if isinstance(self.arrivals, WorstCaseArrivals) and self.arrivals.n_types != self.n_types:
            raise ConfigurationError("worst-case arrivals built for a different D")
        for a, fn in enumerate(self.mean_fns):
            if fn.lipschitz > self.lipschitz + 1e-12:
                raise ConfigurationError(
                    f"mean of {self.actions[a]!r} has Lipschitz constant {fn.lipschitz} > {self.lipschitz}")
            if fn.lipschitz > 0 and not self.relevance[a]:
                raise ConfigurationError(f"non-constant mean for {self.actions[a]!r} needs relevant types")

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def relevance_dimension(self) -> int:
        return max(len(r) for r in self.relevance)

    def mean_reward(self, a: int, x: Sequence[float]) -> float:
        return self.mean_fns[a]([x[i - 1] for i in self.relevance[a]])

    def means(self, x: Sequence[float]) -> List[float]:
        return [self.mean_reward(a, x) for a in range(self.n_actions)]

    def outcome(self, x: Sequence[float]) -> StepOutcome:
        mu = self.means(x)
        best = max(range(len(mu)), key=mu.__getitem__)
        return StepOutcome(tuple(x), tuple(mu), best, mu[best])

    def sample_context(self, rng: random.Random, t: int) -> List[float]:
        if t < 1:
            raise ValueError("t is 1-based")
        return self.arrivals.sample(rng, t)

    def sample_reward(self, a: int, x: Sequence[float], rng: random.Random) -> float:
        return self.noise.sample(self.mean_reward(a, x), rng)

    def instantaneous_regret(self, x: Sequence[float], a: int) -> float:
        mu = self.means(x)
        return max(mu) - mu[a]


def sample_context(env: EnvironmentSpec, rng: random.Random, t: int) -> List[float]:
    return env.sample_context(rng, t)


def sample_reward(env: EnvironmentSpec, a: int, x: Sequence[float], rng: random.Random) -> float:
    return env.sample_reward(a, x, rng)


def instantaneous_regret(env: EnvironmentSpec, x: Sequence[float], a: int) -> float:
    return env.instantaneous_regret(x, a)


def lemma1_env(x_fixed: float = 0.5, p_high: float = 0.8, noise_types: int = 0) -> EnvironmentSpec:
    """Two actions where per-type marginal estimates mislead a greedy learner.

    Action ``a`` pays 0.5 everywhere and depends on type 1, which is pinned
    at ``x_fixed``; action ``b`` pays ``x_2`` with ``x_2 = 1`` w.p. ``p_high``,
    else 0. ``noise_types`` appends irrelevant uniform types so that
    pair-based learners with ``gamma_rel = 1`` (which need D >= 3) can run.
    """
    if not 0.0 <= p_high <= 1.0:
        raise ValueError("p_high must be a probability")
    if not 0.0 <= x_fixed <= 1.0:
        raise ValueError("x_fixed must lie in [0, 1]")
    marginals = (Discrete((x_fixed,), (1.0,)), Discrete((0.0, 1.0), (1.0 - p_high, p_high)))
    marginals += (Uniform(),) * noise_types
    return EnvironmentSpec(
        n_types=2 + noise_types,
        actions=("a", "b"),
        relevance=((1,), (2,)),
        mean_fns=(Constant(0.5), Identity(0)),
        noise=Bernoulli(),
        arrivals=IIDArrivals(marginals),
    )


def identity_env(n_types: int, relevant: Sequence[int], noise: Optional[Noise] = None,
                 arrivals: Optional[Arrivals] = None) -> EnvironmentSpec:
    """One action per entry of ``relevant``, each paying its own type's context."""
    return EnvironmentSpec(
        n_types=n_types,
        actions=tuple(f"id{i}" for i in relevant),
        relevance=tuple((i,) for i in relevant),
        mean_fns=tuple(Identity(0) for _ in relevant),
        noise=TruncatedUniform(0.0) if noise is None else noise,
        arrivals=arrivals,
    )


def lipschitz_audit(env: EnvironmentSpec, rng: random.Random, samples: int = 10_000) -> float:
    """Largest observed ``|dmu| / (L ||dx_rel||)`` over random context pairs (<= 1 passes)."""
    worst = 0.0
    for _ in range(samples):
        x = [rng.random() for _ in range(env.n_types)]
        y = [rng.random() for _ in range(env.n_types)]
        for a, rel in enumerate(env.relevance):
            dist = math.sqrt(sum((x[i - 1] - y[i - 1]) ** 2 for i in rel))
            if dist == 0.0:
                continue
            ratio = abs(env.mean_reward(a, x) - env.mean_reward(a, y)) / (env.lipschitz * dist)
            worst = max(worst, ratio)
    return worst
