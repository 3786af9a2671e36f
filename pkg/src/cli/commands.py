"""Command-line front end: ``list``, ``run`` and ``compare``."""
import argparse
import os
from typing import Dict, List, Optional

import pandas as pd
from pydantic import ValidationError

from sim.batch import run_batch
from sim.engine import Trace, run
from sim.metrics import RunSummary, metrics
from sim.persistence import FLOAT_FORMAT, load_scenario, write_series, write_summary, write_trace
from sim.scenario import Scenario
from sim.scenarios import builtin_scenarios
from utils.errors import ScenarioError
from utils.tracer import tracer

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSAFE = 2
EXIT_SOLVER = 3

CONTROLLERS = ("tvcbfqp", "mpc")


def _switch(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "1", "yes"):
        return True
    if lowered in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got '{value}'")


def _add_run_options(p: argparse.ArgumentParser):
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="Built-in scenario name")
    source.add_argument("--config", help="Scenario JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="Output directory (default: $TVCBF_OUTPUT_ROOT/<scenario>)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--time-varying", type=_switch)
    p.add_argument("--noise-robust", type=_switch)
    p.add_argument("--actuation-inflated", type=_switch)
    p.add_argument("--rhs-only", type=_switch)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvcbf", description="Time-varying CBF safety filter experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="List built-in scenarios")

    run_p = sub.add_parser("run", help="Run one scenario and write its trace, metrics and figure series")
    _add_run_options(run_p)

    compare_p = sub.add_parser("compare", help="Run one scenario under several controllers")
    _add_run_options(compare_p)
    compare_p.add_argument("--controllers", nargs="+", choices=CONTROLLERS, default=list(CONTROLLERS))
    return parser


def _resolve(args: argparse.Namespace, registry: Dict[str, Scenario]) -> Scenario:
    if args.config:
        scenario = load_scenario(args.config)
    else:
        if args.scenario not in registry:
            raise ScenarioError(f"Unknown scenario '{args.scenario}'. Available: {', '.join(sorted(registry))}")
        scenario = registry[args.scenario]
    return scenario.with_overrides(
        seed=args.seed,
        dt=args.dt,
        duration=args.duration,
        gamma=args.gamma,
        beta=args.beta,
        k=args.k,
        b=args.b,
        time_varying=args.time_varying,
        noise_robust=args.noise_robust,
        actuation_inflated=args.actuation_inflated,
        rhs_only=args.rhs_only,
    )


def _output_dir(args: argparse.Namespace, scenario: Scenario) -> str:
    if args.out:
        return args.out
    return os.path.join(os.getenv("TVCBF_OUTPUT_ROOT", "runs"), scenario.name)


def _write_run(trace: Trace, summary: RunSummary, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    write_trace(trace, os.path.join(out_dir, "trace.csv"))
    write_summary(summary, os.path.join(out_dir, "metrics.json"))
    write_series(trace, out_dir)


def cmd_list(registry: Dict[str, Scenario]) -> int:
    for name, scenario in registry.items():
        print(f"{name:<24} {scenario.description}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, registry: Dict[str, Scenario]) -> int:
    tracer.start_span("cmd_run", {"scenario": args.scenario, "config": args.config})
    try:
        scenario = _resolve(args, registry)
        print(f"[Run] {scenario.name} (controller={scenario.controller.kind}, seed={scenario.seed}, "
              f"dt={scenario.dt}, duration={scenario.duration})")
        trace = run(scenario)
    except (ValidationError, ValueError) as e:
        print(f"[Run] Error: {e}")
        tracer.end_span(error=str(e))
        return EXIT_USAGE
    except RuntimeError as e:
        print(f"[Run] Solver failure: {e}")
        tracer.end_span(error=str(e))
        return EXIT_SOLVER

    out_dir = _output_dir(args, scenario)
    if not trace.records:
        os.makedirs(out_dir, exist_ok=True)
        write_trace(trace, os.path.join(out_dir, "trace.csv"))
        print(f"[Run] Empty trace written to {out_dir}")
        tracer.end_span(outputs={"ticks": 0})
        return EXIT_OK

    summary = metrics(trace)
    _write_run(trace, summary, out_dir)
    print(f"[Run] min alpha* = {summary.min_alpha:.9g}, min h = {summary.min_h:.9g}, "
          f"min distance = {summary.min_distance:.9g}")
    print(f"[Run] Artifacts written to {out_dir}")
    tracer.end_span(outputs={"exit_code": summary.exit_code, "min_alpha": summary.min_alpha})
    return summary.exit_code


def comparison_table(summaries: List[RunSummary]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "controller": s.controller,
            "min_alpha": s.min_alpha,
            "max_lateral_deviation": s.max_lateral_deviation,
            "mean_solve_time": s.mean_solve_time,
            "mean_step_time": s.mean_step_time,
            "target_reached": s.target_reached,
            "safe": s.safe,
        }
        for s in summaries
    ])


def cmd_compare(args: argparse.Namespace, registry: Dict[str, Scenario]) -> int:
    tracer.start_span("cmd_compare", {"scenario": args.scenario, "controllers": args.controllers})
    try:
        base = _resolve(args, registry)
        scenarios = [base.with_controller(kind) for kind in args.controllers]
        print(f"[Compare] {base.name}: {', '.join(args.controllers)}")
        traces = run_batch(scenarios, max_workers=len(scenarios))
    except (ValidationError, ValueError) as e:
        print(f"[Compare] Error: {e}")
        tracer.end_span(error=str(e))
        return EXIT_USAGE
    except RuntimeError as e:
        print(f"[Compare] Solver failure: {e}")
        tracer.end_span(error=str(e))
        return EXIT_SOLVER

    out_root = _output_dir(args, base)
    summaries = []
    for kind, trace in zip(args.controllers, traces):
        if not trace.records:
            continue
        summary = metrics(trace)
        _write_run(trace, summary, os.path.join(out_root, kind))
        summaries.append(summary)

    table = comparison_table(summaries)
    os.makedirs(out_root, exist_ok=True)
    table.to_csv(os.path.join(out_root, "compare.csv"), index=False, float_format=FLOAT_FORMAT)
    print(table.to_string(index=False, float_format=lambda v: FLOAT_FORMAT % v))

    codes = [s.exit_code for s in summaries]
    code = EXIT_SOLVER if EXIT_SOLVER in codes else (EXIT_UNSAFE if EXIT_UNSAFE in codes else EXIT_OK)
    tracer.end_span(outputs={"exit_code": code})
    return code


def main(argv: Optional[List[str]] = None, registry: Optional[Dict[str, Scenario]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    registry = builtin_scenarios() if registry is None else registry
    if args.command == "list":
        return cmd_list(registry)
    if args.command == "run":
        return cmd_run(args, registry)
    return cmd_compare(args, registry)
