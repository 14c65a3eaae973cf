"""Compare the compiled and pure-Python kernel backends.

Times the exact distance, table interpolation and a whole low-level plan
under each backend. Each backend runs in its own interpreter because the
choice is made at import time.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

PROBE = r"""
import json, math, random, time
from carchase import kernels
from carchase.core import AgentTask, Instance, Pose
from carchase.lowlevel import SEARCH_BACKEND, PlannerConfig, plan_single, table_for

rng = random.Random(0)
n = int(REPEAT)
queries = [(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0, 6.28),
            rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0, 6.28)) for _ in range(n)]
t = time.perf_counter()
for q in queries:
    kernels.rs_distance(*q, 2.0, 1.0)
rs_us = (time.perf_counter() - t) / n * 1e6

inst = Instance(50.0, 50.0, (((20.0, 20.0), 3.0), ((30.0, 32.0), 3.0)),
                (AgentTask(Pose(5, 5, 0), Pose(45, 44, 1.6)),))
cfg = PlannerConfig(heuristic_mode="hybrid")
table = table_for(inst, cfg)
pts = [(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(0, 6.28)) for _ in range(n)]
t = time.perf_counter()
for p in pts:
    table.lookup(*p)
lookup_us = (time.perf_counter() - t) / n * 1e6

plans = {}
for mode in ("exact", "hybrid"):
    c = PlannerConfig(heuristic_mode=mode)
    t = time.perf_counter()
    res = plan_single(inst, 0, (), c, table=table if mode == "hybrid" else None)
    plans[mode] = {"seconds": time.perf_counter() - t, "expansions": res.expansions, "cost": res.cost}
print(json.dumps({"backend": kernels.BACKEND, "search": SEARCH_BACKEND, "rs_distance_us": rs_us,
                  "lookup_us": lookup_us, "plan": plans}))
"""


def run(backend: str, repeat: int) -> dict:
    env = dict(os.environ, CARCHASE_KERNELS=backend)
    out = subprocess.run([sys.executable, "-c", PROBE.replace("REPEAT", str(repeat))], env=env,
                         capture_output=True, text=True)
    if out.returncode != 0:
        return {"backend": backend, "error": out.stderr.strip().splitlines()[-1] if out.stderr else "failed"}
    return json.loads(out.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20000)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    results = [run("python", args.repeat), run("compiled", args.repeat)]
    print(f"{'backend':10} {'rs_distance':>14} {'table lookup':>14} {'plan exact':>12} {'plan hybrid':>12}")
    for r in results:
        if "error" in r:
            print(f"{r['backend']:10} unavailable: {r['error']}")
            continue
        print(f"{r['backend']:10} {r['rs_distance_us']:11.2f} us {r['lookup_us']:11.2f} us "
              f"{r['plan']['exact']['seconds']:10.3f} s {r['plan']['hybrid']['seconds']:10.3f} s")
    ok = [r for r in results if "error" not in r]
    if len(ok) == 2:
        py, cc = ok
        print(f"compiled/python ratio: rs_distance {py['rs_distance_us'] / cc['rs_distance_us']:.1f}x, "
              f"plan exact {py['plan']['exact']['seconds'] / cc['plan']['exact']['seconds']:.2f}x")
        same = all(py["plan"][m] == {**cc["plan"][m], "seconds": py["plan"][m]["seconds"]}
                   for m in ("exact", "hybrid"))
        print(f"search loop: {py['search']} vs {cc['search']}; identical costs and expansions: {same}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
