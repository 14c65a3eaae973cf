"""Measure how much the car-like relevance filter actually filters.

Solves instances with the carchase configuration, records every low-level
call's constraint set, and classifies each (state on the returned path,
applicable constraint) pair:

    time     outside the time window
    near     within tau_spatial + radius of the state-goal segment
    cone     admitted only because it lies ahead of the state
    dropped  inside the window, behind the state and far from the segment

    python3 benchmarks/filter_rate.py results/suite/m50_a12_d20_00*.yaml [--timeout 30]
"""
from __future__ import annotations

import argparse
import sys
from collections import Counter

from carchase import bench, cbs
from carchase.cahc import point_segment_distance
from carchase.cbs import SolverConfig, SolveTimeout, solve
from carchase.core import ANY_AGENT, load_instance


def classify(path, goal, constraints, cfg) -> Counter:
    out = Counter()
    gx, gy = goal.x, goal.y
    for s in path:
        sx, sy, st = s.pose.x, s.pose.y, s.time
        for c in constraints:
            if c.t_begin > st + cfg.t_window or c.t_end < st - cfg.t_window:
                out["time"] += 1
                continue
            cx, cy = c.center
            if point_segment_distance(cx, cy, sx, sy, gx, gy) <= cfg.tau_spatial + c.radius:
                out["near"] += 1
            elif (cx - sx) * (gx - sx) + (cy - sy) * (gy - sy) > 0.0:
                out["cone"] += 1
            else:
                out["dropped"] += 1
    return out


def measure(path, timeout: float) -> Counter:
    inst = load_instance(path)
    config = SolverConfig(planner=bench.planner_config("carchase"), timeout=timeout)
    rel = config.planner.relevance
    total = Counter()
    real = cbs.plan_single

    def spy(instance, agent, constraints, *args, **kwargs):
        res = real(instance, agent, constraints, *args, **kwargs)
        mine = [c for c in constraints if c.agent in (agent, ANY_AGENT)]
        total.update(classify(res.path, instance.agents[agent].goal, mine, rel))
        return res

    cbs.plan_single = spy
    try:
        solve(inst, config)
        total["solved"] += 1
    except SolveTimeout:
        total["timeout"] += 1
    finally:
        cbs.plan_single = real
    return total


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instances", nargs="+")
    ap.add_argument("--timeout", type=float, default=30.0)
    args = ap.parse_args(argv)
    grand = Counter()
    for p in args.instances:
        c = measure(p, args.timeout)
        grand.update(c)
        n = c["time"] + c["near"] + c["cone"] + c["dropped"]
        if n:
            print(f"{p}: pairs {n}, kept {(c['near'] + c['cone']) / n:.1%} "
                  f"(cone only {c['cone'] / n:.1%}), {'solved' if c['solved'] else 'timeout'}")
    n = grand["time"] + grand["near"] + grand["cone"] + grand["dropped"]
    if not n:
        print("no constrained low-level calls")
        return 0
    print(f"all: pairs {n}; outside window {grand['time'] / n:.1%}, near segment {grand['near'] / n:.1%}, "
          f"ahead only {grand['cone'] / n:.1%}, filtered spatially {grand['dropped'] / n:.1%}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
