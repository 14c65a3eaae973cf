"""The compiled search must reproduce the Python search exactly: paths, costs, counters."""
import json
import os
import random
import subprocess
import sys

import pytest

from carchase import lowlevel
from carchase.cbs import SolverConfig, solve
from carchase.core import ANY_AGENT, FOREVER, AgentTask, Constraint, Instance, Pose
from carchase.lowlevel import BudgetExceededError, NoPathError, PlannerConfig, make_cache, plan_single

pytestmark = pytest.mark.skipif(lowlevel.SEARCH_BACKEND != "compiled", reason="compiled search not built")

MODES = [(h, c) for h in ("exact", "hybrid") for c in ("off", "conflict_aware", "state_only")]


def _scenario(seed):
    rng = random.Random(seed)
    obs = tuple(((rng.uniform(5, 25), rng.uniform(5, 25)), 2.0) for _ in range(4))

    def free_pose():
        while True:
            x, y = rng.uniform(2, 28), rng.uniform(2, 28)
            if all((x - o[0][0]) ** 2 + (y - o[0][1]) ** 2 > 16.0 for o in obs):
                return Pose(x, y, rng.uniform(0, 6.28))

    inst = Instance(30.0, 30.0, obs, (AgentTask(free_pose(), free_pose()),))
    cons = []
    for i in range(rng.randint(5, 30)):
        t = rng.randint(0, 40)
        end = FOREVER if rng.random() < 0.05 else t + 2
        agent = ANY_AGENT if rng.random() < 0.1 else 0
        # ids above 256 exercise the fingerprint overflow list
        cons.append(Constraint(i * 13 % 400, agent, (rng.uniform(0, 30), rng.uniform(0, 30)), 2.2, t, end))
    return inst, cons


def _outcome(inst, cons, cfg, cache):
    out = []
    for drop in (3, 0):
        try:
            r = plan_single(inst, 0, cons[: len(cons) - drop], cfg, cache=cache)
            out.append((r.cost, r.expansions, r.h_exact, r.h_approx, r.path))
        except (NoPathError, BudgetExceededError) as exc:
            out.append(str(exc))
    if cache is not None:
        out.append(cache.stats)
    return out


@pytest.mark.parametrize("seed", range(6))
def test_compiled_search_matches_python_loop(seed, monkeypatch):
    inst, cons = _scenario(seed)
    for h, c in MODES:
        cfg = PlannerConfig(heuristic_mode=h, cache_mode=c, max_expansions=4000, cache_capacity=300)
        compiled = _outcome(inst, cons, cfg, make_cache(cfg))
        with monkeypatch.context() as m:
            m.setattr(lowlevel, "_csearch", None)
            python = _outcome(inst, cons, cfg, make_cache(cfg))
        assert compiled == python, (h, c)


def test_compiled_cbs_run_matches_python(monkeypatch):
    inst = Instance(30.0, 16.0, (((15.0, 3.0), 1.5),),
                    (AgentTask(Pose(4, 8, 0), Pose(26, 8, 0)),
                     AgentTask(Pose(26, 8, 3.14159), Pose(4, 8, 3.14159)),
                     AgentTask(Pose(15, 13, 4.71), Pose(15, 7, 4.71))))
    for mode in ("conflict_aware", "state_only"):
        cfg = SolverConfig(planner=PlannerConfig(heuristic_mode="hybrid", cache_mode=mode), timeout=120)
        a = solve(inst, cfg)
        with monkeypatch.context() as m:
            m.setattr(lowlevel, "_csearch", None)
            b = solve(inst, cfg)
        assert a.solution == b.solution
        assert a.stats == b.stats


PROBE = r"""
import json
from carchase.core import AgentTask, Constraint, Instance, Pose
from carchase.lowlevel import SEARCH_BACKEND, PlannerConfig, make_cache, plan_single
inst = Instance(30.0, 30.0, (((15.0, 15.0), 3.0),), (AgentTask(Pose(3, 4, 0.3), Pose(26, 25, 2.0)),))
cons = [Constraint(i, 0, (6.0 + 2 * i, 8.0 + i), 2.2, 3 + i, 5 + i) for i in range(8)]
rows = []
for h in ("exact", "hybrid"):
    cfg = PlannerConfig(heuristic_mode=h, cache_mode="conflict_aware")
    r = plan_single(inst, 0, cons, cfg, cache=make_cache(cfg))
    path = [[float(s.pose.x).hex(), float(s.pose.y).hex(), s.time] for s in r.path]
    rows.append([float(r.cost).hex(), r.expansions, path])
print(json.dumps([SEARCH_BACKEND, rows]))
"""


def test_pure_python_install_gives_identical_plans():
    runs = {}
    for backend in ("python", "compiled"):
        env = dict(os.environ, CARCHASE_KERNELS=backend)
        out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
        name, rows = json.loads(out.stdout)
        runs[backend] = rows
        assert name == backend
    assert runs["python"] == runs["compiled"]
