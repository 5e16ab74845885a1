"""Brute-force re-derivation of RELEAF decisions from a raw episode log.

Nothing here touches the package's partition or statistics code: partitions
are rebuilt by counting arrivals in the log, and every cell is recomputed
by scanning all earlier observations that fall in its intervals.
"""

import math
from itertools import combinations

import numpy as np


def in_interval_vec(xs, level, index):
    lo = index / 2 ** level
    hi = (index + 1) / 2 ** level
    if index == 0:
        return (xs >= 0.0) & (xs <= hi)
    return (xs > lo) & (xs <= hi)


def in_interval(x, level, index):
    lo = index / 2 ** level
    hi = (index + 1) / 2 ** level
    if index == 0:
        return 0.0 <= x <= hi
    return lo < x <= hi


class OraclePartition:
    """Active intervals as [level, index, born_at]; counters are recounted from history."""

    def __init__(self, pos, l_min=0):
        self.pos = pos
        self.active = [[l_min, k, 1] for k in range(2 ** l_min)]

    def find(self, x):
        hits = [iv for iv in self.active if in_interval(x, iv[0], iv[1])]
        assert len(hits) == 1, hits
        return hits[0]

    def arrive(self, contexts, t, rho):
        """Handle the arrival at step t (contexts[0..t-1] seen so far)."""
        iv = self.find(contexts[t - 1][self.pos])
        level, index, born = iv
        xs = np.array([c[self.pos] for c in contexts[born - 1:t]], dtype=float)
        n = int(in_interval_vec(xs, level, index).sum())
        if n >= 2 ** (rho * level):
            self.active.remove(iv)
            self.active.append([level + 1, 2 * index, t + 1])
            self.active.append([level + 1, 2 * index + 1, t + 1])


def replay(log, n_types, n_actions, params):
    """Yield, for each logged step, the oracle's view of what RELEAF must do.

    ``log`` is a list of ``(x, action, rewards)`` with ``rewards`` mapping the
    observed actions to their rewards.
    """
    g = params.gamma_rel
    wide = list(combinations(range(1, n_types + 1), 2 * g))
    narrow = list(combinations(range(1, n_types + 1), g))
    dstar = math.comb(n_types - 1, 2 * g - 1)
    parts = [OraclePartition(i, params.l_min) for i in range(n_types)]
    contexts = []
    observed = [np.array([a in r for _, _, r in log], dtype=bool) for a in range(n_actions)]
    for t, (x, action, rewards) in enumerate(log, start=1):
        contexts.append(x)
        cur = [p.find(x[p.pos]) for p in parts]

        X = np.array(contexts[:-1], dtype=float).reshape(t - 1, n_types)
        member = [in_interval_vec(X[:, i], cur[i][0], cur[i][1]) for i in range(n_types)]

        def cell(w, a):
            born = max(cur[i - 1][2] for i in w)
            mask = observed[a][:t - 1].copy()
            mask[:born - 1] = False
            for i in w:
                mask &= member[i - 1]
            s, m = 0, 0.0
            for u in np.flatnonzero(mask):
                m = (s * m + log[u][2][a]) / (s + 1)
                s += 1
            return s, m

        cells = {(w, a): cell(w, a) for w in wide for a in range(n_actions)}

        ctrl = []
        for i in range(n_types):
            length = 2.0 ** -cur[i][0]
            raw = 2.0 * math.log(t * dstar * n_actions / params.delta) / (params.L * length) ** 2
            ctrl.append(max(1.0, raw / params.kappa))
        under = set()
        for i in range(1, n_types + 1):
            for w in wide:
                if i in w:
                    for a in range(n_actions):
                        if cells[(w, a)][0] < ctrl[i - 1]:
                            under.add(a)

        view = {"t": t, "under": under, "intervals": [(c[0], c[1]) for c in cur], "cells": cells}
        if not under:
            rel, var, chat, est = {}, {}, {}, {}
            for a in range(n_actions):
                rel[a], var[a] = [], {}
                for v in narrow:
                    ws = [w for w in wide if set(v) <= set(w)]
                    diffs = [abs(cells[(w1, a)][1] - cells[(w2, a)][1]) for w1 in ws for w2 in ws]
                    limit = 3 * params.L * math.sqrt(g) * max(2.0 ** -cur[i - 1][0] for i in v)
                    if all(d <= limit for d in diffs):
                        rel[a].append(v)
                        var[a][v] = max(diffs)
                if rel[a]:
                    chat[a] = min(rel[a], key=lambda v: (var[a][v], v))
                else:
                    chat[a] = None  # random fallback; checked by membership
            view.update(rel=rel, var=var, chat=chat)
            view["est_fn"] = lambda a, c, cells=cells: _aggregate(cells, wide, c, a)
        yield view

        for p in parts:
            p.arrive(contexts, t, params.rho)


def _aggregate(cells, wide, c, a):
    total, weighted = 0, 0.0
    for w in wide:
        if set(c) <= set(w):
            s, m = cells[(w, a)]
            total += s
            weighted += m * s
    return weighted / total


def check_episode(policy, env, rng, T):
    """Drive ``policy`` for ``T`` steps and compare each decision with the oracle.

    Returns ``(steps compared, exploitation steps)``; raises AssertionError on mismatch.
    """
    log, decisions = [], []
    for t in range(1, T + 1):
        x = env.sample_context(rng, t)
        d = policy.step(x)
        rewards = {a: env.sample_reward(a, x, rng) for a in policy.required_observations(d)}
        policy.ingest(d, rewards)
        log.append((x, d.action, rewards))
        decisions.append(d)

    n = n_exploit = 0
    for view, d in zip(replay(log, policy.n_types, policy.n_actions, policy.params), decisions):
        t = view["t"]
        assert tuple((p.level, p.index) for p in d.intervals) == tuple(view["intervals"]), t
        assert set(d.underexplored) == view["under"], (t, d.underexplored, view["under"])
        if view["under"]:
            assert d.phase.value == "explore", t
            assert d.action in view["under"], t
        else:
            assert d.phase.value == "exploit", t
            best, best_val = None, -math.inf
            for a in range(policy.n_actions):
                assert d.candidates[a] == view["rel"][a], (t, a)
                assert d.variations[a] == view["var"][a], (t, a)
                if view["chat"][a] is None:
                    assert d.rel_empty_fallback[a] and len(d.estimated_relevant[a]) == policy.params.gamma_rel
                else:
                    assert not d.rel_empty_fallback[a]
                    assert d.estimated_relevant[a] == view["chat"][a], (t, a)
                est = view["est_fn"](a, d.estimated_relevant[a])
                assert d.estimates[a] == est, (t, a, d.estimates[a], est)
                if est > best_val:
                    best, best_val = a, est
            assert d.action == best, t
            n_exploit += 1
        n += 1
    return n, n_exploit
