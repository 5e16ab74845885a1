"""Contextual bandits that learn which context types matter to each action."""

from .baselines import EpsilonGreedy, GreedyReleaf
from .environments import EnvironmentSpec, identity_env, lemma1_env
from .errors import ConfigurationError, ProtocolError
from .harness import (ExperimentConfig, EpisodeSummary, TrajectoryRecord, emit_csv, load_config,
                      run_episode, slope_fit, theoretical_bounds)
from .partition import Interval, TypePartition, initial_partition
from .policy import Decision, FeedbackMode, Phase, PolicyParams, Releaf, control_number, d_star
from .stats import StatCell, StatsStore, TupleKey, tuple_keys

__version__ = "0.1.0"
