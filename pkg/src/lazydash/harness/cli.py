"""Command line entry point: plan, generate, bench, validate.

Exit codes: 0 success, 1 planner or validation failure, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path as FsPath

from .scenario import ScenarioError, load_scenario, save_scenario

OK, FAIL, BAD_INPUT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(BAD_INPUT)


def _write(path, text: str) -> None:
    FsPath(path).parent.mkdir(parents=True, exist_ok=True)
    FsPath(path).write_text(text)


def cmd_plan(a) -> int:
    from ..planner import SOLVED, plan
    from .svg import export_svg

    sc = load_scenario(a.scenario)
    res = plan(sc, a.mode, a.seed, log_level=a.log)
    rep = res.report
    if a.out:
        _write(a.out, rep.dumps() + "\n")
    if a.trace:
        _write(a.trace, res.trace.dumps() + "\n")
    m = rep.metrics
    print(f"{sc.name} {a.mode} seed={a.seed}: {rep.outcome}"
          + (f" makespan={m['makespan']:.3f}" if m.get("makespan") is not None else "")
          + f" |V_M|={m.get('V_M', 0)} |E_M|={m.get('E_M', 0)} validated={m.get('validated_edges', 0)}"
          + f" time={rep.timings.get('total', 0.0):.2f}s")
    if rep.outcome != SOLVED:
        print(f"planner failed: {rep.reason}", file=sys.stderr)
        return FAIL
    if a.svg:
        frames = export_svg(sc, rep.schedule, a.dt or rep.schedule["dt"], a.svg)
        print(f"wrote {len(frames)} frames to {a.svg}")
    return OK


def cmd_generate(a) -> int:
    from .generators import generate_scenario

    params = {}
    if a.robots is not None:
        params["robots"] = a.robots
    if a.objects is not None:
        params["objects"] = a.objects
    for kv in a.param or []:
        k, sep, v = kv.partition("=")
        if not sep:
            raise ScenarioError(f"--param expects key=value, got {kv!r}")
        try:
            params[k] = json.loads(v)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"--param {k}: {v!r} is not a number or boolean") from e
    sc = generate_scenario(a.family, params, a.seed)
    if a.out:
        save_scenario(sc, a.out)
        print(f"wrote {sc.name} to {a.out}")
    else:
        print(json.dumps(sc.to_dict(), indent=2, sort_keys=True))
    return OK


def cmd_bench(a) -> int:
    from .bench import expand_suite, load_suite, run_suite, write_csv

    suite = load_suite(a.suite)
    runs = expand_suite(suite, FsPath(a.suite).parent)
    for r in runs:   # surface bad scenario references before any planning starts
        r.scenario()
    workers = a.workers if a.workers is not None else int(suite.get("workers", 1))
    rows = run_suite(runs, workers)
    write_csv(rows, a.out)
    solved = sum(1 for r in rows if r["outcome"] == "Solved")
    print(f"{len(rows)} runs, {solved} solved; wrote {a.out}")
    return OK


def cmd_validate(a) -> int:
    from .validate import validate_schedule

    sc = load_scenario(a.scenario)
    try:
        rep = json.loads(FsPath(a.report).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"cannot load report {a.report}: {e}") from e
    sched = rep.get("schedule") if isinstance(rep, dict) else None
    if not sched:
        print("report carries no schedule (planner did not solve)", file=sys.stderr)
        return FAIL
    try:
        res = validate_schedule(sc, sched, a.dt or float(sched["dt"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"malformed schedule in {a.report}: {e}") from e
    if res.ok:
        print(f"PASS ({res.samples} samples)")
        return OK
    print(f"FAIL: {len(res.violations)} violation(s)")
    for v in res.violations[:20]:
        print("  " + json.dumps(v, sort_keys=True))
    return FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lazydash", description="Lazy multi-robot task and motion planning on planar workcells.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    q = sub.add_parser("plan", help="plan one scenario")
    q.add_argument("scenario")
    q.add_argument("--mode", choices=["lazy", "eager"], default="lazy")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help="report JSON path")
    q.add_argument("--trace", help="trace JSON path")
    q.add_argument("--svg", metavar="DIR", help="write one SVG frame per time step into DIR")
    q.add_argument("--dt", type=float, help="frame step for --svg (default: the schedule's dt)")
    q.add_argument("--log", choices=["error", "info", "debug"], help="trace level (default: $LAZYDASH_LOG or info)")
    q.set_defaults(fn=cmd_plan)

    g = sub.add_parser("generate", help="write a generated scenario")
    g.add_argument("family")
    g.add_argument("--robots", type=int)
    g.add_argument("--objects", type=int)
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="extra family parameter, repeatable")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_generate)

    b = sub.add_parser("bench", help="run a benchmark suite and write CSV")
    b.add_argument("suite")
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int)
    b.set_defaults(fn=cmd_bench)

    v = sub.add_parser("validate", help="replay a report's schedule against its scenario")
    v.add_argument("scenario")
    v.add_argument("report")
    v.add_argument("--dt", type=float)
    v.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
