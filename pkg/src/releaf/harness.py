"""Experiment runner: configs, episodes, regret accounting and CSV output."""

from __future__ import annotations

import csv
import json
import logging
import math
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import EpsilonGreedy, GreedyReleaf
from .environments import (Bernoulli, Constant, Discrete, EnvironmentSpec, IIDArrivals, Identity,
                           PiecewiseLinear, TruncatedUniform, Uniform, WeightedSum,
                           WorstCaseArrivals, lemma1_env)
from .errors import ConfigurationError
from .partition import epsilon_min_level
from .policy import Phase, PolicyParams, Releaf
from .stats import check_relevance_dimension

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

ALGORITHMS = ("releaf", "greedy", "epsgreedy")

CSV_COLUMNS = ["t", "phase", "action", "beta", "reward_observed", "inst_regret", "cum_regret",
               "cum_regret_explore", "cum_regret_exploit", "rel_hit", "max_interval_level"]


@dataclass
class ExperimentConfig:
    env: EnvironmentSpec
    algorithm: str = "releaf"
    params: PolicyParams = field(default_factory=PolicyParams)
    horizon: int = 1000
    seeds: List[int] = field(default_factory=lambda: [0])
    log_stride: int = 100
    checkpoints: List[int] = field(default_factory=list)
    output: Optional[str] = None
    stop_after_exploits: Optional[int] = None
    eps_c: float = 1.0
    eps_grid_level: int = 2

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        if self.log_stride < 1:
            raise ConfigurationError("log_stride must be a positive integer")
        if any(c < 1 for c in self.checkpoints):
            raise ConfigurationError("checkpoints must be positive")
        if self.stop_after_exploits is not None and self.stop_after_exploits < 1:
            raise ConfigurationError("stop_after_exploits must be positive")
        if self.algorithm == "releaf":
            check_relevance_dimension(self.env.n_types, self.params.gamma_rel)


@dataclass
class TrajectoryRecord:
    t: int
    phase: str
    action: str
    beta: int
    reward_observed: Optional[float]
    inst_regret: float
    cum_regret: float
    cum_regret_explore: float
    cum_regret_exploit: float
    rel_hit: Optional[int]
    max_interval_level: int

    def row(self) -> List[str]:
        def num(v):
            return "" if v is None else repr(v)
        return [str(self.t), self.phase, self.action, str(self.beta), num(self.reward_observed),
                repr(self.inst_regret), repr(self.cum_regret), repr(self.cum_regret_explore),
                repr(self.cum_regret_exploit), num(self.rel_hit), str(self.max_interval_level)]


@dataclass
class EpisodeSummary:
    algorithm: str
    seed: int
    horizon: int
    total_regret: float
    explore_regret: float
    exploit_regret: float
    explore_steps: int
    exploit_steps: int
    observation_cost: float
    rel_hit_rate: Optional[float]
    max_exploit_regret: float
    fallback_steps: int = 0
    max_interval_level: int = 0
    # T -> (R, R_O, R_I)
    checkpoints: Dict[int, Tuple[float, float, float]] = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["checkpoints"] = {str(k): list(v) for k, v in self.checkpoints.items()}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EpisodeSummary":
        d = json.loads(text)
        d["checkpoints"] = {int(k): tuple(v) for k, v in d["checkpoints"].items()}
        return cls(**d)


# -- config parsing ------------------------------------------------------------

def _mean_fn(spec: Dict[str, Any]):
    kind = spec.get("kind")
    if kind == "constant":
        return Constant(float(spec["value"]))
    if kind == "identity":
        return Identity(int(spec.get("coord", 0)), bool(spec.get("flip", False)))
    if kind == "piecewise_linear":
        return PiecewiseLinear(tuple(spec["knots"]), tuple(spec["values"]), int(spec.get("coord", 0)))
    if kind == "weighted_sum":
        return WeightedSum(tuple((float(t["weight"]), _mean_fn(t["mean"])) for t in spec["terms"]))
    raise ConfigurationError(f"unknown mean kind {kind!r}")


def _noise(spec: Optional[Dict[str, Any]]):
    if spec is None or spec.get("kind", "bernoulli") == "bernoulli":
        return Bernoulli()
    if spec["kind"] == "truncated_uniform":
        return TruncatedUniform(float(spec.get("width", 0.0)))
    raise ConfigurationError(f"unknown noise kind {spec['kind']!r}")


def _marginal(spec: Dict[str, Any]):
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return Uniform()
    if kind == "discrete":
        return Discrete(tuple(spec["values"]), tuple(spec["probs"]))
    if kind == "fixed":
        return Discrete((float(spec["value"]),), (1.0,))
    raise ConfigurationError(f"unknown marginal kind {kind!r}")


def environment_from_dict(d: Dict[str, Any]) -> EnvironmentSpec:
    if d.get("preset") == "lemma1":
        return lemma1_env(float(d.get("x_fixed", 0.5)), float(d.get("p_high", 0.8)),
                          int(d.get("noise_types", 0)))
    try:
        n_types = int(d["D"])
        actions = d["actions"]
    except KeyError as e:
        raise ConfigurationError(f"environment is missing {e.args[0]!r}") from None
    arr = d.get("arrivals", {})
    if arr.get("kind", "iid") == "worst_case":
        arrivals = WorstCaseArrivals(float(arr["rho"]), n_types, int(arr.get("start_level", 0)))
    elif arr.get("kind", "iid") == "iid":
        specs = arr.get("marginals")
        if specs is None:
            specs = [arr.get("default", {"kind": "uniform"})] * n_types
        arrivals = IIDArrivals(tuple(_marginal(m) for m in specs))
    else:
        raise ConfigurationError(f"unknown arrival kind {arr['kind']!r}")
    return EnvironmentSpec(
        n_types=n_types,
        actions=tuple(str(a["name"]) for a in actions),
        relevance=tuple(tuple(int(i) for i in a["relevance"]) for a in actions),
        mean_fns=tuple(_mean_fn(a["mean"]) for a in actions),
        noise=_noise(d.get("noise")),
        arrivals=arrivals,
        lipschitz=float(d.get("lipschitz", 1.0)),
    )


def config_from_dict(d: Dict[str, Any]) -> ExperimentConfig:
    run = d.get("run", {})
    p = dict(d.get("params", {}))
    epsilon = p.pop("epsilon", None)
    known = set(PolicyParams.__dataclass_fields__)
    unknown = set(p) - known
    if unknown:
        raise ConfigurationError(f"unknown params {sorted(unknown)}")
    if epsilon is not None:
        p["l_min"] = epsilon_min_level(float(p.get("L", 1.0)), float(epsilon))
    params = PolicyParams(**p)
    eg = d.get("epsgreedy", {})
    if "environment" not in d:
        raise ConfigurationError("config has no [environment] section")
    cfg = ExperimentConfig(
        env=environment_from_dict(d["environment"]),
        algorithm=run.get("algorithm", "releaf"),
        params=params,
        horizon=int(run.get("horizon", 1000)),
        seeds=[int(s) for s in run.get("seeds", [0])],
        log_stride=int(run.get("log_stride", 100)),
        checkpoints=[int(c) for c in run.get("checkpoints", [])],
        output=run.get("output"),
        stop_after_exploits=run.get("stop_after_exploits"),
        eps_c=float(eg.get("c", 1.0)),
        eps_grid_level=int(eg.get("grid_level", 2)),
    )
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{path}: {e}") from None
    return config_from_dict(data)


# -- episodes --------------------------------------------------------------

def episode_seeds(seed: int) -> Tuple[int, int]:
    """Independent (environment, policy) seeds derived from one episode seed."""
    env_seed, policy_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(env_seed), int(policy_seed)


def make_policy(config: ExperimentConfig, policy_seed: int):
    env = config.env
    if config.algorithm == "releaf":
        return Releaf(env.n_types, env.n_actions, replace(config.params, seed=policy_seed))
    if config.algorithm == "greedy":
        return GreedyReleaf(env.n_types, env.n_actions, replace(config.params, seed=policy_seed))
    return EpsilonGreedy(env.n_types, env.n_actions, config.eps_c, config.eps_grid_level, policy_seed)


def run_episode(config: ExperimentConfig, seed: int) -> Tuple[List[TrajectoryRecord], EpisodeSummary]:
    config.validate()
    env = config.env
    env_seed, policy_seed = episode_seeds(seed)
    env_rng = random.Random(env_seed)
    policy = make_policy(config, policy_seed)
    c_o = config.params.c_O
    stride = config.log_stride
    checkpoints = set(config.checkpoints)
    stop = config.stop_after_exploits
    names = env.actions
    relevance = [set(r) for r in env.relevance]

    records: List[TrajectoryRecord] = []
    marks: Dict[int, Tuple[float, float, float]] = {}
    cum = cum_o = cum_i = 0.0
    cost = 0.0
    n_explore = n_exploit = hits = fallbacks = 0
    max_exploit = 0.0
    t = 0
    for t in range(1, config.horizon + 1):
        x = env.sample_context(env_rng, t)
        decision = policy.step(x)
        wanted = policy.required_observations(decision)
        rewards = {a: env.sample_reward(a, x, env_rng) for a in wanted}
        policy.ingest(decision, rewards)

        a = decision.action
        mu = env.means(x)
        gap = max(mu) - mu[a]
        inst = gap + (c_o if decision.observe else 0.0)
        if decision.observe:
            cost += c_o
        cum += inst
        hit = None
        if decision.phase is Phase.EXPLORE:
            cum_o += inst
            n_explore += 1
        else:
            cum_i += inst
            n_exploit += 1
            if gap > max_exploit:
                max_exploit = gap
            if decision.estimated_relevant is not None:
                hit = int(relevance[a] <= set(decision.estimated_relevant[a]))
                hits += hit
            if decision.rel_empty_fallback and decision.rel_empty_fallback.get(a):
                fallbacks += 1
        done = stop is not None and n_exploit >= stop
        if t % stride == 0 or t == config.horizon or done:
            records.append(TrajectoryRecord(
                t, decision.phase.value, names[a], int(decision.observe),
                rewards.get(a), inst, cum, cum_o, cum_i, hit, policy.max_level()))
        if t in checkpoints:
            marks[t] = (cum, cum_o, cum_i)
        if done:
            break

    summary = EpisodeSummary(
        algorithm=config.algorithm, seed=seed, horizon=t,
        total_regret=cum, explore_regret=cum_o, exploit_regret=cum_i,
        explore_steps=n_explore, exploit_steps=n_exploit, observation_cost=cost,
        rel_hit_rate=(hits / n_exploit) if n_exploit and config.algorithm != "epsgreedy" else None,
        max_exploit_regret=max_exploit, fallback_steps=fallbacks,
        max_interval_level=policy.max_level(), checkpoints=marks)
    return records, summary


def _episode_job(args):
    config, seed = args
    return run_episode(config, seed)


def run_experiment(config: ExperimentConfig, seeds: Optional[Sequence[int]] = None,
                   jobs: int = 1) -> List[Tuple[List[TrajectoryRecord], EpisodeSummary]]:
    """Run one episode per seed; ``jobs > 1`` uses worker processes."""
    config.validate()
    seeds = list(config.seeds if seeds is None else seeds)
    if jobs <= 1:
        return [run_episode(config, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_episode_job, [(config, s) for s in seeds]))


# -- analysis -------------------------------------------------------------

def slope_fit(checkpoint_values: Sequence[Tuple[float, float]]) -> float:
    """Least-squares slope of log R against log T."""
    if len(checkpoint_values) < 3:
        raise ValueError("slope fit needs at least three checkpoints")
    ts = np.array([c[0] for c in checkpoint_values], dtype=float)
    rs = np.array([c[1] for c in checkpoint_values], dtype=float)
    if np.any(rs <= 0) or np.any(ts <= 0):
        raise ValueError("slope fit is undefined for nonpositive T or R")
    slope, _ = np.polyfit(np.log(ts), np.log(rs), 1)
    return float(slope)


def exponent_g(d_rel: int) -> float:
    """Regret time exponent for relevance dimension ``d_rel`` (balanced rho)."""
    root = math.sqrt(4 * d_rel ** 2 + 16 * d_rel + 12)
    return (2 + 2 * d_rel + root) / (4 + 2 * d_rel + root)


@dataclass(frozen=True)
class Bounds:
    exploit_regret: float
    explore_regret: float
    explore_count: float
    exponent: float
    applicable: bool
    note: str = ""


def theoretical_bounds(params: PolicyParams, n_types: int, n_actions: int, T: int,
                       d_rel: int = 1) -> Bounds:
    """Closed-form worst-case bounds for ``gamma_rel = 1``.

    Exploitation: ``16 L D 2^(2 rho) T^(rho / (1 + rho))``. Exploration:
    ``(c_O + 1) [960 D^2 ln(T |A| D / delta) / (7 L^2) T^(4 / rho) + 64 D^2 / 3 T^(2 / rho)]``,
    scaled by ``2^(4 l_min)`` for coarser-first starts. The exploration count
    bound is the exploration regret bound divided by ``c_O + 1``.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    L, rho, D = params.L, params.rho, n_types
    exploit = 16.0 * L * D * 2.0 ** (2 * rho) * T ** (rho / (1 + rho))
    count = (960.0 * D ** 2 * math.log(T * n_actions * D / params.delta) / (7.0 * L ** 2) * T ** (4.0 / rho)
             + 64.0 * D ** 2 / 3.0 * T ** (2.0 / rho))
    count *= 2.0 ** (4 * params.l_min)
    notes = []
    applicable = True
    if params.kappa != 1:
        applicable = False
        notes.append("control numbers scaled by kappa != 1")
    if params.gamma_rel != 1 or d_rel != 1:
        applicable = False
        notes.append("closed forms hold for gamma_rel = D_rel = 1")
    return Bounds(exploit, (params.c_O + 1) * count, count, exponent_g(d_rel), applicable, "; ".join(notes))


# -- CSV ----------------------------------------------------------------------

def emit_csv(trajectory: Sequence[TrajectoryRecord], summary: Optional[EpisodeSummary], path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for rec in trajectory:
                w.writerow(rec.row())
        if summary is not None:
            path.with_suffix(".summary.json").write_text(summary.to_json() + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def read_csv(path) -> List[TrajectoryRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            t, phase, action, beta, rew, inst, cum, co, ci, hit, lvl = row
            out.append(TrajectoryRecord(
                int(t), phase, action, int(beta), float(rew) if rew else None, float(inst),
                float(cum), float(co), float(ci), int(hit) if hit else None, int(lvl)))
    return out


def summary_from_records(records: Sequence[TrajectoryRecord]) -> Dict[str, float]:
    """Summary fields recoverable from a trajectory (all of them when the stride is 1)."""
    last = records[-1]
    exploit = [r for r in records if r.phase == Phase.EXPLOIT.value]
    hits = [r.rel_hit for r in exploit if r.rel_hit is not None]
    return {
        "total_regret": last.cum_regret,
        "explore_regret": last.cum_regret_explore,
        "exploit_regret": last.cum_regret_exploit,
        "explore_steps": sum(r.phase == Phase.EXPLORE.value for r in records),
        "exploit_steps": len(exploit),
        "rel_hit_rate": (sum(hits) / len(hits)) if hits else None,
        "max_exploit_regret": max((r.inst_regret for r in exploit), default=0.0),
    }


def summarize_dir(directory) -> Dict[str, Dict[str, Any]]:
    """Aggregate ``*.summary.json`` files per algorithm: means, spreads, slopes."""
    directory = Path(directory)
    groups: Dict[str, List[EpisodeSummary]] = {}
    files = sorted(directory.glob("*.summary.json"))
    if not files:
        raise FileNotFoundError(f"no episode summaries in {directory}")
    for f in files:
        s = EpisodeSummary.from_json(f.read_text())
        groups.setdefault(s.algorithm, []).append(s)
    report = {}
    for algo, rows in sorted(groups.items()):
        entry: Dict[str, Any] = {"episodes": len(rows)}
        for name in ("total_regret", "explore_regret", "exploit_regret", "explore_steps",
                     "exploit_steps", "observation_cost", "max_exploit_regret"):
            vals = np.array([getattr(r, name) for r in rows], dtype=float)
            entry[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
        rates = [r.rel_hit_rate for r in rows if r.rel_hit_rate is not None]
        entry["rel_hit_rate"] = float(np.mean(rates)) if rates else None
        common = sorted(set.intersection(*(set(r.checkpoints) for r in rows)))
        if len(common) >= 3:
            for idx, label in ((0, "total"), (2, "exploit"), (1, "explore")):
                pts = [(T, float(np.mean([r.checkpoints[T][idx] for r in rows]))) for T in common]
                try:
                    entry[f"slope_{label}"] = slope_fit(pts)
                except ValueError:
                    entry[f"slope_{label}"] = None
        report[algo] = entry
    return report
