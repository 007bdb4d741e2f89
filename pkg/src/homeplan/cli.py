"""Command-line harness: suites, runs, comparisons, and replay checks.

Exit codes: 0 clean run, 1 infrastructure error during episodes or a replay
mismatch, 2 configuration error (bad flags, missing or invalid files).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agent import AgentConfig
from .errors import HomeplanError
from .grounding import MessageTable
from .llm import RemoteBackend, ScriptedBackend
from .mcts import PlannerConfig
from .precondgen import compare_fixture
from .sim import load_trace, replay_trace
from .suite import (
    MetricsReport,
    completion_rates,
    config_hash,
    generate_easy_suite,
    load_suite,
    resolve_world,
    run_suite,
    save_suite,
    stepwise_from_counts,
)

EXIT_OK = 0
EXIT_INFRA = 1
EXIT_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homeplan",
        description="Household task-planning benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-suite", help="generate a pick-and-place task suite")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument(
        "--worlds",
        required=True,
        help="comma-separated world fixture references",
    )
    gen.add_argument("--out", required=True, help="suite file to write")
    gen.add_argument("--name", default="easy")

    run = sub.add_parser("run", help="run a suite and write a metrics report")
    run.add_argument("--suite", required=True)
    run.add_argument("--mode", choices=["react", "mcts"], default="react")
    run.add_argument("--grounding", choices=["on", "off"], default="on")
    run.add_argument("--expansions", type=int, default=5)
    run.add_argument("--seed", type=int, default=None, help="override world seeds")
    run.add_argument(
        "--backend",
        required=True,
        help="'scripted:<script.json>' (fresh per episode) or 'remote'",
    )
    run.add_argument("--out", default=".", help="directory for report files")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--max-steps", type=int, default=None,
                     help="cap every task's step budget")
    run.add_argument("--messages", default=None,
                     help="feedback message-table JSON override")
    run.add_argument("--templates", default=None,
                     help="prompt-template directory override")

    cmp = sub.add_parser(
        "compare-preconds",
        help="compare generated vs ground-truth preconditions on the shipped fixture",
    )
    cmp.add_argument("--fixture", default=None, help="alternative labeled-pairs file")
    cmp.add_argument("--out", default=None, help="also write the report as JSON")

    replay = sub.add_parser("replay-trace", help="re-execute a recorded transcript")
    replay.add_argument("--trace", default=None, help="trace fixture (default: shipped)")
    replay.add_argument("--world", default=None, help="override the trace's world fixture")
    replay.add_argument("--grounding", choices=["on", "off"], default="on")
    replay.add_argument("--messages", default=None,
                        help="feedback message-table JSON override")

    report = sub.add_parser("report", help="render reports from stored inputs")
    report.add_argument("--records", default=None, help="metrics report JSON to render")
    report.add_argument(
        "--stepwise-counts", default=None, help="per-skill counts JSON to tabulate"
    )
    report.add_argument(
        "--completion-counts",
        default=None,
        help="per-group outcome counts, e.g. 'moderate=7/20,hard=3/20'",
    )
    return parser


def _cmd_gen_suite(args) -> int:
    worlds = [ref.strip() for ref in args.worlds.split(",") if ref.strip()]
    suite = generate_easy_suite(args.seed, args.count, worlds, name=args.name)
    save_suite(suite, args.out)
    print(f"wrote {len(suite.tasks)} tasks to {args.out}")
    return EXIT_OK


def _make_backend_factory(spec: str):
    if spec == "remote":
        backend = RemoteBackend()
        return lambda task: backend
    if spec.startswith("scripted:"):
        script_path = spec.split(":", 1)[1]
        if not Path(script_path).exists():
            raise FileNotFoundError(f"script file not found: {script_path}")
        with open(script_path, encoding="utf-8") as handle:
            script_data = json.load(handle)
        return lambda task: ScriptedBackend.from_dict(script_data)
    raise ValueError(f"unknown backend spec: {spec!r}")


def _cmd_run(args) -> int:
    suite = load_suite(args.suite)
    factory = _make_backend_factory(args.backend)
    config = AgentConfig(
        mode="react" if args.mode == "react" else "react+mcts",
        grounding_enabled=args.grounding == "on",
        planner=PlannerConfig(expansion_budget=args.expansions),
        step_cap=args.max_steps,
        template_dir=args.templates,
    )
    messages = MessageTable.load(args.messages) if args.messages else None
    report, _ = run_suite(
        suite,
        config,
        factory,
        base_dir=Path(args.suite).parent,
        workers=args.workers,
        seed_override=args.seed,
        messages=messages,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{config_hash(config, suite)}_{report.seed}"
    (out_dir / f"{stem}.json").write_text(report.serialize() + "\n", encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(report.render_text() + "\n", encoding="utf-8")
    print(report.render_text())
    print(f"\nreport written to {out_dir / (stem + '.json')}")
    return EXIT_INFRA if report.errors else EXIT_OK


def _cmd_compare_preconds(args) -> int:
    report = compare_fixture(args.fixture)
    print(report.render_text())
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def _cmd_replay_trace(args) -> int:
    if args.trace is None:
        from importlib import resources

        trace_path = Path(
            str(resources.files("homeplan.data").joinpath("traces/clear_table.json"))
        )
    else:
        trace_path = Path(args.trace)
    trace = load_trace(trace_path)
    world_ref = args.world if args.world else trace.world
    world = resolve_world(world_ref, trace_path.parent.parent)
    messages = MessageTable.load(args.messages) if args.messages else None
    _, results = replay_trace(
        trace, world, grounding_enabled=args.grounding == "on", messages=messages
    )
    mismatches = 0
    for result in results:
        status = "ok" if result.ok else "MISMATCH"
        print(f"step {result.index:>3}  {result.action:<28} {status}")
        if not result.ok:
            mismatches += 1
            print(f"  expected: {result.expected!r}")
            print(f"  actual:   {result.actual!r}")
    print(f"\n{len(results) - mismatches}/{len(results)} observations reproduced")
    return EXIT_OK if mismatches == 0 else EXIT_INFRA


def _cmd_report(args) -> int:
    did_anything = False
    if args.records:
        with open(args.records, encoding="utf-8") as handle:
            data = json.load(handle)
        report = MetricsReport(
            suite_name=data["suite"],
            config_label=data["config"],
            seed=data["seed"],
            episodes=data["episodes"],
            errors=data.get("errors", []),
        )
        print(report.render_text())
        did_anything = True
    if args.stepwise_counts:
        with open(args.stepwise_counts, encoding="utf-8") as handle:
            counts = json.load(handle)
        table = stepwise_from_counts(counts["rows"])
        print(table.render_text())
        did_anything = True
    if args.completion_counts:
        groups = {}
        for part in args.completion_counts.split(","):
            label, fraction = part.split("=")
            successes, total = fraction.split("/")
            groups[label.strip()] = (int(successes), int(total))
        for label, rate in completion_rates(groups).items():
            print(f"{label}: {rate}%")
        did_anything = True
    if not did_anything:
        raise ValueError("report: provide --records, --stepwise-counts, or --completion-counts")
    return EXIT_OK


_COMMANDS = {
    "gen-suite": _cmd_gen_suite,
    "run": _cmd_run,
    "compare-preconds": _cmd_compare_preconds,
    "replay-trace": _cmd_replay_trace,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (HomeplanError, FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
