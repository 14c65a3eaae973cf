"""Command-line entry point: generate, run, summarize, solve."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .core import InstanceError, load_instance, validate_solution, write_solution


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v]


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v]


def cmd_generate(args) -> int:
    files = bench.generate_suite(args.seed, args.out, map_sizes=args.map_size, agent_counts=args.agents,
                                 densities=args.density, count=args.count,
                                 obstacle_radius=args.obstacle_radius)
    print(f"wrote {len(files)} instances to {args.out}")
    return 0


def cmd_run(args) -> int:
    configs = [c for c in args.configs.split(",") if c]
    records = bench.run_suite(args.suite, configs, timeout=args.timeout, jobs=args.jobs, out_csv=args.out)
    solved = sum(r.solved for r in records)
    print(f"{solved}/{len(records)} runs solved; rows in {args.out}")
    return 0


def cmd_summarize(args) -> int:
    s = bench.summarize(args.csv, args.base, args.test)
    print(bench.format_table(s))
    if args.out:
        written = bench.write_summary(s, args.out)
        for p in written.values():
            print(f"wrote {p}")
    return 0


def cmd_solve(args) -> int:
    from .cbs import NoSolutionError, SolveTimeout, SolverConfig, solve
    from .grid import GridConfig, GridInstance, GridNoSolution, GridTimeout, grid_cbs_solve

    inst = load_instance(args.instance)
    if isinstance(inst, GridInstance):
        mode = "off" if args.config == "baseline" else "conflict_aware"
        try:
            sol, stats = grid_cbs_solve(inst, GridConfig(cache_mode=mode, timeout=args.timeout))
        except (GridNoSolution, GridTimeout) as exc:
            print(f"unsolved: {exc}", file=sys.stderr)
            return 1
        doc = {"cost": sol.cost, "costs": sol.costs, "paths": [[list(c) for c in p] for p in sol.paths]}
        text = json.dumps(doc)
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        return 0
    config = SolverConfig(planner=bench.planner_config(args.config), timeout=args.timeout)
    try:
        res = solve(inst, config)
    except (NoSolutionError, SolveTimeout) as exc:
        print(f"unsolved: {exc}", file=sys.stderr)
        return 1
    problems = validate_solution(inst, res.solution, config.planner.resolution)
    for p in problems:
        print(f"invalid: {p}", file=sys.stderr)
    if args.out:
        write_solution(res.solution, args.out)
    print(f"cost {res.solution.cost!r} ct_expanded {res.stats.ct_expanded} expansions {res.stats.expansions}")
    if res.stats.cache is not None:
        print(res.stats.cache.dump())
    return 0 if not problems else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carchase", description="Car-like multi-agent planning benchmarks.")
    ap.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance suite")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--map-size", type=_ints, default=list(bench.DEFAULT_MAP_SIZES))
    g.add_argument("--agents", type=_ints, default=list(bench.DEFAULT_AGENTS))
    g.add_argument("--density", type=_floats, default=list(bench.DEFAULT_DENSITIES))
    g.add_argument("--count", type=int, default=bench.DEFAULT_COUNT)
    g.add_argument("--obstacle-radius", type=float, default=2.5)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run configurations over a suite and write a CSV")
    r.add_argument("--suite", required=True)
    r.add_argument("--configs", default="baseline,carchase")
    r.add_argument("--timeout", type=float, default=bench.DEFAULT_TIMEOUT)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="compare two configurations from a CSV")
    s.add_argument("--csv", required=True)
    s.add_argument("--base", default="baseline")
    s.add_argument("--test", default="carchase")
    s.add_argument("--out", help="directory for summary.json, table.md, speedup_vs_agents.csv")
    s.set_defaults(func=cmd_summarize)

    v = sub.add_parser("solve", help="solve one instance file")
    v.add_argument("instance")
    v.add_argument("--config", default="carchase", choices=sorted(bench.CONFIGS))
    v.add_argument("--timeout", type=float, default=120.0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_solve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, bench.PlacementError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
