"""Command line front end: run scenarios, compare traces, validate trees.

Exit codes: 0 success, 1 comparison mismatch, 2 input/usage error,
3 invariant violation during a run.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import dsl, runner, transform
from .scheduler import load_trace
from .world import load_map_file

SEED_ENV = "MBBT_SEED"


def _cmd_run(args):
    try:
        doc = dsl.parse_scenario_file(args.scenario)
    except (OSError, dsl.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    seed = doc.seed
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            print(f"error: bad {SEED_ENV} value", file=sys.stderr)
            return 2
    mode = args.mode if args.mode else ("udp" if doc.mode == "udp" else "det")
    if mode == "udp":
        return _run_udp(doc, args)
    result = runner.run_scenario(doc, max_ticks=args.ticks, cycles=args.cycles,
                                 strict_collisions=args.strict_collisions,
                                 seed=seed)
    if args.trace:
        result.trace.save(args.trace)
    if args.plot:
        from .plotting import plot_trace
        grid = load_map_file(doc.map_path)
        plot_trace(result.trace.records, grid, args.plot,
                   title=os.path.basename(args.scenario))
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    if result.violation:
        print(f"invariant violation: {result.violation}", file=sys.stderr)
    return result.exit_code


def _run_udp(doc, args):
    from .udprun import run_scenario_udp
    trace = run_scenario_udp(doc, duration_s=args.udp_duration)
    if args.trace:
        trace.save(args.trace)
    print(json.dumps(runner.summarize(doc, trace.records), indent=2,
                     sort_keys=True))
    return 0


def _cmd_compare(args):
    try:
        run_a = load_trace(args.trace_a)
        run_b = load_trace(args.trace_b)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        equal = transform.trace_equivalence(run_a, run_b, args.project)
    except transform.TransformError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if equal:
        print(f"traces match under namespace {args.project!r}")
        return 0
    events_a = transform.completion_events(run_a, args.project)
    events_b = transform.completion_events(run_b, args.project)
    for i, (a, b) in enumerate(zip(events_a, events_b)):
        if a != b:
            print(f"first divergence at completion {i}: {a} != {b}")
            break
    else:
        print(f"completion counts differ: {len(events_a)} vs {len(events_b)}")
    return 1


def _cmd_parse(args):
    try:
        with open(args.tree, encoding="utf-8") as fh:
            tree = dsl.parse_tree(fh.read())
    except (OSError, dsl.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(dsl.serialize_tree(tree))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mbbt",
        description="Multi-robot behavior-tree scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a .scn scenario")
    run.add_argument("scenario")
    run.add_argument("--ticks", type=int, default=None,
                     help="override the scenario's max tick count")
    run.add_argument("--cycles", type=int, default=None,
                     help="stop once every robot finished this many goal cycles")
    run.add_argument("--mode", choices=("det", "udp"), default=None)
    run.add_argument("--trace", default=None, help="write the JSONL trace here")
    run.add_argument("--plot", default=None,
                     help="render trajectories to this image file")
    run.add_argument("--strict-collisions", action="store_true",
                     help="record cell co-occupancy warnings in the trace")
    run.add_argument("--udp-duration", type=float, default=5.0,
                     help="wall-clock seconds to run in udp mode")
    run.set_defaults(func=_cmd_run)

    compare = sub.add_parser("compare", help="compare two deterministic traces")
    compare.add_argument("trace_a")
    compare.add_argument("trace_b")
    compare.add_argument("--project", required=True,
                         help="namespace whose completion events are compared")
    compare.set_defaults(func=_cmd_compare)

    parse = sub.add_parser("parse", help="validate a .bt file and echo its "
                                         "canonical form")
    parse.add_argument("tree")
    parse.set_defaults(func=_cmd_parse)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
