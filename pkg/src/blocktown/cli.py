"""Command line: run simulations, analyze run directories, query the optimal
allocation, and drive the qualitative coding pipeline.

Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 endpoint
authentication error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from .analysis import AnalysisError, analyze, write_reports
from .coding import SampleError, StageError, run_pipeline, sample_logs
from .gateway import (
    AuthError,
    GatewayClient,
    MissingRecordingError,
    ModelEndpoint,
    ReplayStore,
    exchange_key,
)
from .metrics import optimal_system_utility, utility_as_float
from .simulation import ConfigError, RunConfig, RunSummary, run


def _load_config(path: str) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return RunConfig.from_dict(data)


def _load_endpoint(path: str) -> ModelEndpoint:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"endpoint file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"endpoint file is not valid JSON: {exc}")
    try:
        return ModelEndpoint.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad endpoint settings: {exc}")


def _print_summary(summary: RunSummary) -> None:
    converged = (
        f"step {summary.converged_at}" if summary.converged_at is not None else "never"
    )
    print(f"steps run:            {summary.steps_run}")
    print(f"converged at:         {converged}")
    print(f"final system utility: {summary.final_system_utility:.4f}")
    print(f"optimal utility:      {summary.optimal_system_utility:.4f}")
    print(f"price of anarchy:     {summary.price_of_anarchy:.4f}")
    print(f"residential gini:     {summary.residential_gini:.4f}")
    matrix = summary.action_matrix
    print(
        f"moves: {matrix['moves']}  stays: {matrix['stays']}  "
        f"altruistic: {matrix['altruistic_actions']:.1%}  "
        f"egoistic: {matrix['egoistic_actions']:.1%}"
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    out = args.out or f"runs/{Path(args.config).stem}-seed{config.seed}"
    summary = run(config, out, replay_path=args.replay)
    print(f"run directory: {out}")
    _print_summary(summary)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    summary = analyze(args.run_dir)
    paths = write_reports(args.run_dir, summary)
    _print_summary(summary)
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_optimal(args: argparse.Namespace) -> int:
    scaled = optimal_system_utility(args.n, args.q, args.h)
    print(
        f"optimal system utility for N={args.n}, Q={args.q}, H={args.h}: "
        f"{utility_as_float(scaled, args.h):.4f} (scaled {scaled})"
    )
    return 0


def _cmd_qualitative(args: argparse.Namespace) -> int:
    batch = sample_logs(args.run_dir, k=args.k, seed=args.seed)
    run_dir = Path(args.run_dir)
    if args.replay:
        store = ReplayStore.load(args.replay)

        def factory(stage: str):
            counter = itertools.count(1)

            def complete(prompt: str) -> str:
                return store.get(exchange_key(f"judge-{stage}", next(counter), prompt))

            return complete

        record_store = None
        client = None
    else:
        if not args.judge:
            raise ConfigError("qualitative needs --judge (or --replay)")
        endpoint = _load_endpoint(args.judge)
        client = GatewayClient(endpoint)
        record_store = ReplayStore(run_dir / "judge_store.jsonl")
        exchange_path = run_dir / "judge_exchanges.jsonl"
        exchange_path.write_text("", encoding="utf-8")

        def factory(stage: str):
            counter = itertools.count(1)

            def complete(prompt: str) -> str:
                text, exchanges = client.complete(prompt)
                with open(exchange_path, "a", encoding="utf-8") as handle:
                    for exchange in exchanges:
                        handle.write(
                            json.dumps(
                                {"stage": stage, **exchange.to_dict()},
                                ensure_ascii=False,
                            )
                            + "\n"
                        )
                record_store.put(
                    exchange_key(f"judge-{stage}", next(counter), prompt), text
                )
                return text

            return complete

    try:
        result = run_pipeline(batch, factory, out_dir=run_dir)
    finally:
        if client is not None:
            client.close()
    print(f"open codes:    {len(result.open_codes)}")
    print(f"categories:    {', '.join(c.category_name for c in result.axial_codes)}")
    print(f"core category: {result.core_category}")
    print(f"theory:        {result.theory}")
    for name in ("open_codes.json", "axial_codes.json", "theory.json"):
        print(f"wrote {run_dir / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocktown",
        description="Residential-migration social dilemma simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation run")
    p_run.add_argument("--config", required=True, help="run config JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument(
        "--replay", default=None, help="replay store for offline model runs"
    )
    p_run.add_argument("--out", default=None, help="run directory to write")
    p_run.set_defaults(fn=_cmd_run)

    p_analyze = sub.add_parser("analyze", help="recompute metrics from a run directory")
    p_analyze.add_argument("run_dir", help="run directory with config.json + events.jsonl")
    p_analyze.set_defaults(fn=_cmd_analyze)

    p_opt = sub.add_parser("optimal", help="optimal system utility for N agents")
    p_opt.add_argument("--n", type=int, required=True, help="number of agents")
    p_opt.add_argument("--q", type=int, required=True, help="number of blocks")
    p_opt.add_argument("--h", type=int, required=True, help="block capacity")
    p_opt.set_defaults(fn=_cmd_optimal)

    p_qual = sub.add_parser(
        "qualitative", help="three-stage qualitative coding of a run's reasoning logs"
    )
    p_qual.add_argument("run_dir", help="run directory with events.jsonl")
    p_qual.add_argument("--judge", default=None, help="judge endpoint JSON file")
    p_qual.add_argument(
        "--replay", default=None, help="replay store with recorded judge responses"
    )
    p_qual.add_argument("--k", type=int, default=100, help="reasoning sample size")
    p_qual.add_argument("--seed", type=int, default=0, help="sampling seed")
    p_qual.set_defaults(fn=_cmd_qualitative)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AuthError as exc:
        print(f"auth error: {exc}", file=sys.stderr)
        return 3
    except (AnalysisError, SampleError, StageError, MissingRecordingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
