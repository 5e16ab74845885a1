"""Command line entry point: ``releaf run | summarize | bounds``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigurationError
from .harness import emit_csv, load_config, run_experiment, summarize_dir, theoretical_bounds

logger = logging.getLogger("releaf")


def _seeds(text: str):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.horizon is not None:
        config.horizon = args.horizon
    if args.seeds:
        config.seeds = args.seeds
    config.validate()
    out = Path(args.out or config.output or "results")
    results = run_experiment(config, jobs=args.jobs)
    for records, summary in results:
        path = out / f"{config.algorithm}_seed{summary.seed}.csv"
        emit_csv(records, summary, path)
        logger.info("seed %d: R=%.4f R_O=%.4f R_I=%.4f explore=%d -> %s", summary.seed,
                    summary.total_regret, summary.explore_regret, summary.exploit_regret,
                    summary.explore_steps, path)
    print(json.dumps(summarize_dir(out), indent=2, sort_keys=True))
    return 0


def cmd_summarize(args) -> int:
    print(json.dumps(summarize_dir(args.dir), indent=2, sort_keys=True))
    return 0


def cmd_bounds(args) -> int:
    config = load_config(args.config)
    b = theoretical_bounds(config.params, config.env.n_types, config.env.n_actions, args.at,
                           config.env.relevance_dimension)
    print(json.dumps({"T": args.at, **asdict(b)}, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="releaf", description="Relevance-learning contextual bandit experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run episodes and write one CSV per seed")
    run.add_argument("config")
    run.add_argument("--seeds", type=_seeds)
    run.add_argument("--out")
    run.add_argument("--horizon", type=int)
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=cmd_run)

    summ = sub.add_parser("summarize", help="aggregate the episode summaries in a directory")
    summ.add_argument("dir")
    summ.set_defaults(func=cmd_summarize)

    bounds = sub.add_parser("bounds", help="evaluate the closed-form regret bounds")
    bounds.add_argument("config")
    bounds.add_argument("--at", type=int, required=True)
    bounds.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as e:
        kind = "config"
        msg = str(e)
    except FileNotFoundError as e:
        kind, msg = "not_found", str(e)
    except (OSError, ValueError) as e:
        kind, msg = type(e).__name__, str(e)
    print(json.dumps({"error": kind, "message": msg}), file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
