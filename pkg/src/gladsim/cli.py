"""Command-line entry point: ``gladsim plan|run|bench|sweep``.

Exit codes: 0 on success, 2 for configuration or input errors, 3 when the
request cannot be served on the scenario.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .abstract_sim import WorldState, events_csv
from .errors import GladError, InfeasibleRequest
from .executive import POLICY_NAMES, PolicyConfig, run_trial, trace_log
from .harness import (
    ExperimentConfig,
    Workspace,
    config_from_dict,
    emit_report,
    load_config,
    run_experiment,
    seed_from_env,
    sweep,
)
from .plan_optimizer import format_plan
from .safety_estimation import SensorEstimator

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON experiment config; flags override its values")
    p.add_argument("--scenario", help="scenario file or bundled name (default urban_grid)")
    p.add_argument("--seed", type=int, help="base seed (GLAD_SEED overrides)")
    p.add_argument("--out", help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gladsim", description="Task-motion planning with safety estimates.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the optimal plan for a scenario")
    _add_common(p)
    p.add_argument("--policy", default="GLAD", choices=POLICY_NAMES)

    p = sub.add_parser("run", help="run one trial and print its trace")
    _add_common(p)
    p.add_argument("--policy", default="GLAD", choices=POLICY_NAMES)
    p.add_argument("--traffic", default="heavy", help="traffic name, optionally name=lambda")
    p.add_argument("--events", action="store_true", help="emit executed behaviors as CSV instead of the log")

    for name, text in (("bench", "run the policy comparison"), ("sweep", "vary estimator recall and precision")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--policies", help="comma-separated policy names")
        p.add_argument("--traffic", help="comma-separated traffic names, optionally name=lambda")
        p.add_argument("--trials", type=int, help="trials per (policy, traffic) cell")
        p.add_argument("--jobs", type=int, help="worker processes")
        if name == "bench":
            p.add_argument("--format", default="table", choices=("table", "csv"))
        else:
            p.add_argument("--recalls", type=_floats, default=[0.55, 0.7, 0.85, 0.95])
            p.add_argument("--precisions", type=_floats, default=[0.84])
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    flags = {
        "scenario": args.scenario,
        "policies": getattr(args, "policies", None),
        "traffic": getattr(args, "traffic", None),
        "trials_per_cell": getattr(args, "trials", None),
        "jobs": getattr(args, "jobs", None),
        "base_seed": args.seed,
    }
    cfg = config_from_dict({k: v for k, v in flags.items() if v is not None}, cfg)
    return replace(cfg, base_seed=seed_from_env(cfg.base_seed))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _cmd_plan(args: argparse.Namespace, cfg: ExperimentConfig) -> str:
    ws = Workspace.load(cfg)
    policy = PolicyConfig.named(args.policy)
    prefs = ws.prefs if policy.use_pref else ()
    plan = ws.optimizer(policy).optimal_plan(ws.rqst, prefs, ws.scenario.start, cfg.coefficients)
    return format_plan(plan)


def _cmd_run(args: argparse.Namespace, cfg: ExperimentConfig) -> str:
    ws = Workspace.load(cfg)
    policy = PolicyConfig.named(args.policy)
    world = WorldState(ws.scenario.start, cfg.base_seed, cfg.traffic[0], cfg.risky_kinds)
    estimator = SensorEstimator(cfg.sensor.model(), kinds=frozenset(cfg.risky_kinds)) if policy.use_safety else None
    trace = run_trial(
        ws.scenario, ws.rqst, ws.prefs, policy, estimator, world, cfg.coefficients,
        optimizer=ws.optimizer(policy), pref_coeff=cfg.pref_coeff,
    )
    return events_csv(trace.events) if args.events else trace_log(trace)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "plan":
            text = _cmd_plan(args, cfg)
        elif args.command == "run":
            text = _cmd_run(args, cfg)
        elif args.command == "bench":
            text = emit_report(run_experiment(cfg), args.format)
        else:
            text = sweep(cfg, args.recalls, args.precisions)
        _emit(text, args.out)
    except InfeasibleRequest as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GladError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
