"""Command line entry point: run / replay / suite."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import SCENARIOS, RunConfig, load_config, validate
from .errors import ConfigError, EnvironmentFailure, IncompleteLog, PeercoordError
from .harness import replay_metrics, run_episode, run_suite

EXIT_CONFIG = 2
EXIT_ENVIRONMENT = 3
EXIT_RUNTIME = 4


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="scenario id")
    p.add_argument("--config", type=Path, help="JSON config file (flags override it)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--delta", type=int, default=None,
                   help="decision interval: negotiate every delta steps")
    p.add_argument("--reasoner", choices=["heuristic", "llm"], default=None)
    p.add_argument("--agents", type=int, default=None, help="chain length (platoon)")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--pandemic-mode", choices=["expected-value", "stochastic"], default=None)
    p.add_argument("--output-dir", type=Path, default=None)


def _build_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.scenario:
        cfg = RunConfig(scenario=args.scenario)
    else:
        raise ConfigError("provide --scenario or --config")
    updates = {}
    if args.scenario:
        updates["scenario"] = args.scenario
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.delta is not None:
        updates["decision_interval"] = args.delta
    if args.reasoner is not None:
        updates["reasoner"] = args.reasoner
    if args.agents is not None:
        updates["agent_count"] = args.agents
    if args.steps is not None:
        updates["steps"] = args.steps
    if args.pandemic_mode is not None:
        updates["pandemic_mode"] = args.pandemic_mode
    if args.output_dir is not None:
        updates["output_dir"] = str(args.output_dir)
    return validate(dataclasses.replace(cfg, **updates))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="peercoord",
        description="Decentralized multi-agent coordination runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one episode")
    _add_run_flags(run_p)

    replay_p = sub.add_parser("replay", help="recompute metrics from a run log")
    replay_p.add_argument("log", type=Path)

    suite_p = sub.add_parser("suite", help="aggregate runs across seeds")
    _add_run_flags(suite_p)
    suite_p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    suite_p.add_argument("--csv", type=Path, default=None, help="write the aggregate CSV here")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _build_config(args)
            result = run_episode(cfg)
            for key, value in result.metrics.to_dict().items():
                print(f"{key}: {value:.6f}")
            summary = result.summary
            print(f"negotiations: {summary['negotiations']}")
            if summary.get("comm"):
                print(f"mean bytes/agent/round: "
                      f"{summary['comm']['mean_bytes_per_agent_per_round']:.1f}")
            if cfg.output_dir:
                print(f"log written under {cfg.output_dir}")
            return 0
        if args.command == "replay":
            metrics = replay_metrics(args.log)
            for key, value in metrics.to_dict().items():
                print(f"{key}: {value:.6f}")
            return 0
        if args.command == "suite":
            cfg = _build_config(args)
            overrides = {
                k: v for k, v in cfg.to_dict().items()
                if k not in ("scenario", "seed")
            }
            rows, csv_text = run_suite([cfg.scenario], args.seeds, overrides)
            if args.csv:
                args.csv.parent.mkdir(parents=True, exist_ok=True)
                args.csv.write_text(csv_text)
                print(f"wrote {args.csv}")
            else:
                print(csv_text, end="")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnvironmentFailure, IncompleteLog) as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except PeercoordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
