"""Benchmark harness: suite generation, isolated runs, and summaries."""
from __future__ import annotations

import csv
import json
import math
import multiprocessing as mp
import multiprocessing.connection as mp_connection
import re
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .cbs import NoSolutionError, SolveTimeout, SolverConfig, solve
from .core import AgentTask, Instance, Kinematics, Pose, load_instance, write_instance
from .lowlevel import BudgetExceededError, NoPathError, PlannerConfig, plan_single, table_for

CSV_COLUMNS = ["instance", "config", "solved", "wall_time_s", "cost", "expansions", "cache_lookups",
               "cache_hits", "cache_entries", "cache_bytes", "evictions"]

CONFIGS = {
    "baseline": dict(heuristic_mode="exact", cache_mode="off"),
    "carchase": dict(heuristic_mode="hybrid", cache_mode="conflict_aware"),
    "cache-exact": dict(heuristic_mode="exact", cache_mode="conflict_aware"),
    "state-only": dict(heuristic_mode="hybrid", cache_mode="state_only"),
    "hybrid": dict(heuristic_mode="hybrid", cache_mode="off"),
}

DEFAULT_MAP_SIZES = (25, 50)
DEFAULT_AGENTS = (4, 8, 12)
DEFAULT_DENSITIES = (0.0, 0.2)
DEFAULT_COUNT = 20
DEFAULT_TIMEOUT = 30.0

_ID_RE = re.compile(r"^m(\d+)_a(\d+)_d(\d+)_(\d+)$")


class PlacementError(RuntimeError):
    """Could not place obstacles/agents within the retry budget."""


def planner_config(name: str, **overrides) -> PlannerConfig:
    if name not in CONFIGS:
        raise ValueError(f"unknown config {name!r}; choose from {sorted(CONFIGS)}")
    return PlannerConfig(**CONFIGS[name], **overrides)


def instance_id(size: int, agents: int, density: float, k: int) -> str:
    return f"m{size}_a{agents}_d{int(round(density * 100))}_{k:03d}"


def parse_instance_id(name: str) -> dict | None:
    m = _ID_RE.match(name)
    if not m:
        return None
    return {"map": int(m.group(1)), "agents": int(m.group(2)), "density": int(m.group(3)),
            "index": int(m.group(4))}


def random_instance(rng: np.random.Generator, size: float, n_agents: int, density: float, *,
                    obstacle_radius: float = 2.5, kinematics: Kinematics | None = None,
                    retries: int = 2000, name: str = "") -> Instance:
    kin = kinematics or Kinematics()
    R = kin.footprint_radius
    n_obs = int(round(density * size * size / (math.pi * obstacle_radius ** 2)))
    obstacles = tuple(((float(x), float(y)), obstacle_radius)
                      for x, y in rng.uniform(0.0, size, (n_obs, 2)))
    shell = Instance(float(size), float(size), obstacles, (), kin)
    sep = 4.0 * R  # two footprint diameters

    def place(taken):
        for _ in range(retries):
            x, y = rng.uniform(R, size - R, 2)
            if not shell.pose_free(x, y):
                continue
            if all((x - a) ** 2 + (y - b) ** 2 >= sep * sep for a, b in taken):
                return float(x), float(y)
        raise PlacementError(f"could not place agent on {size}x{size} map at density {density}")

    check = reachability_config() if obstacles else None
    starts, goals, tasks = [], [], []
    for _ in range(n_agents):
        for _attempt in range(retries):
            s = place(starts)
            g = place(goals)
            hs, hg = rng.uniform(0.0, 2.0 * math.pi, 2)
            task = AgentTask(Pose(s[0], s[1], float(hs)), Pose(g[0], g[1], float(hg)))
            if check is None or _reachable(shell, task, check):
                break
        else:
            raise PlacementError(f"no reachable start/goal pair on {size}x{size} map at density {density}")
        starts.append(s)
        goals.append(g)
        tasks.append(task)
    agents = tuple(tasks)
    return Instance(float(size), float(size), obstacles, agents, kin, name)


def reachability_config() -> PlannerConfig:
    return PlannerConfig(heuristic_mode="hybrid", cache_mode="off", max_expansions=50_000)


def _reachable(shell: Instance, task: AgentTask, config: PlannerConfig) -> bool:
    """Whether the agent alone can reach its goal; rejects starts boxed in by obstacles."""
    inst = Instance(shell.width, shell.height, shell.obstacles, (task,), shell.kinematics)
    try:
        plan_single(inst, 0, (), config, table=table_for(inst, config))
    except (NoPathError, BudgetExceededError):
        return False
    return True


def generate_suite(seed: int, out_dir, map_sizes: Sequence[int] = DEFAULT_MAP_SIZES,
                   agent_counts: Sequence[int] = DEFAULT_AGENTS,
                   densities: Sequence[float] = DEFAULT_DENSITIES, count: int = DEFAULT_COUNT,
                   obstacle_radius: float = 2.5) -> list[Path]:
    """Write one instance file per (map, agents, density, index) plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for size in map_sizes:
        for n in agent_counts:
            for d in densities:
                for k in range(count):
                    rng = np.random.default_rng([seed, int(size), int(n), int(round(d * 100)), k])
                    name = instance_id(size, n, d, k)
                    inst = random_instance(rng, size, n, d, obstacle_radius=obstacle_radius, name=name)
                    p = out / f"{name}.yaml"
                    write_instance(inst, p)
                    files.append(p)
    manifest = {"seed": seed, "map_sizes": list(map_sizes), "agents": list(agent_counts),
                "densities": list(densities), "count": count, "obstacle_radius": obstacle_radius,
                "instances": [p.name for p in files]}
    (out / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    return files


def suite_instances(suite_dir) -> list[Path]:
    d = Path(suite_dir)
    man = d / "manifest.yaml"
    if man.exists():
        names = yaml.safe_load(man.read_text())["instances"]
        return [d / n for n in names]
    return sorted(p for p in d.glob("*.yaml") if p.name != "manifest.yaml")


# ---------------------------------------------------------------- running

@dataclass
class RunRecord:
    instance: str
    config: str
    solved: bool
    wall_time_s: float
    cost: float | None = None
    expansions: int | None = None
    cache_lookups: int | None = None
    cache_hits: int | None = None
    cache_entries: int | None = None
    cache_bytes: int | None = None
    evictions: int | None = None
    extra: dict = field(default_factory=dict)

    def row(self) -> list[str]:
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "1" if v else "0"
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [cell(getattr(self, c)) for c in CSV_COLUMNS]


def _stats_fields(stats, cache) -> dict:
    out = {"expansions": stats.expansions}
    cs = stats.cache
    if cs is not None:
        out.update(cache_lookups=cs.lookups, cache_hits=cs.hits, cache_entries=cs.entries,
                   cache_bytes=cs.approx_bytes, evictions=cs.evictions)
    extra = {"ct_expanded": stats.ct_expanded, "ct_generated": stats.ct_generated,
             "low_level_calls": stats.low_level_calls, "h_exact": stats.h_exact,
             "h_approx": stats.h_approx, "constraints": stats.constraints}
    if cs is not None:
        extra["cache"] = cs.as_dict()
        if hasattr(cache, "distinct_fingerprints_per_key"):
            extra["fingerprints_per_key"] = cache.distinct_fingerprints_per_key()
    return out, extra


def run_one(instance_path, config_name: str, timeout: float, planner_overrides: dict | None = None) -> RunRecord:
    """Solve one instance in the current process and time it."""
    inst = load_instance(instance_path)
    name = Path(instance_path).stem
    pc = planner_config(config_name, **(planner_overrides or {}))
    if pc.heuristic_mode == "hybrid":
        table_for(inst, pc)  # precomputation is not part of the per-instance time
    cfg = SolverConfig(planner=pc, timeout=timeout)
    t0 = time.perf_counter()
    try:
        res = solve(inst, cfg)
    except SolveTimeout as exc:
        # counters of a timed-out run depend on the clock, so they stay out of the CSV
        _, extra = _stats_fields(exc.stats, exc.cache) if hasattr(exc, "stats") else ({}, {})
        extra["status"] = "timeout"
        return RunRecord(name, config_name, False, time.perf_counter() - t0, extra=extra)
    except NoSolutionError as exc:
        wall = time.perf_counter() - t0
        fields, extra = _stats_fields(exc.stats, exc.cache) if hasattr(exc, "stats") else ({}, {})
        extra["status"] = "no_solution"
        return RunRecord(name, config_name, False, wall, **fields, extra=extra)
    wall = time.perf_counter() - t0
    fields, extra = _stats_fields(res.stats, res.cache)
    extra["status"] = "solved"
    return RunRecord(name, config_name, True, wall, cost=res.solution.cost, **fields, extra=extra)


def _worker(conn, instance_path, config_name, timeout, overrides):
    try:
        rec = run_one(instance_path, config_name, timeout, overrides)
        conn.send(asdict(rec))
    except Exception as exc:  # noqa: BLE001 - any crash is recorded as unsolved
        conn.send({"error": f"{type(exc).__name__}: {exc}"})
    finally:
        conn.close()


def _prewarm(paths: Iterable[Path], configs: Sequence[str], overrides: dict | None):
    """Build approximation tables in the parent so forked workers inherit them."""
    needs = [c for c in configs if CONFIGS[c]["heuristic_mode"] == "hybrid"]
    if not needs:
        return
    seen = set()
    for p in paths:
        inst = load_instance(p)
        k = (inst.width, inst.height, inst.kinematics)
        if k in seen:
            continue
        seen.add(k)
        table_for(inst, planner_config(needs[0], **(overrides or {})))


def run_suite(suite_dir, configs: Sequence[str], timeout: float = DEFAULT_TIMEOUT, jobs: int = 1,
              out_csv=None, *, grace: float = 1.0, planner_overrides: dict | None = None,
              isolate: bool = True) -> list[RunRecord]:
    """Run every (instance, config) pair, each in its own process, writing CSV rows in task order.

    Rows are flushed as soon as every earlier row is known, so a crash keeps
    all completed prefix rows. Per-run statistics go to ``<out_csv>.stats.jsonl``.
    """
    for c in configs:
        planner_config(c)
    paths = suite_instances(suite_dir)
    tasks = [(p, c) for p in paths for c in configs]
    _prewarm(paths, configs, planner_overrides)
    records: list[RunRecord | None] = [None] * len(tasks)
    fh = sfh = writer = None
    if out_csv is not None:
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        fh = open(out_csv, "w", newline="")
        sfh = open(str(out_csv) + ".stats.jsonl", "w")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        fh.flush()
    flushed = 0

    def flush_ready():
        nonlocal flushed
        while flushed < len(tasks) and records[flushed] is not None:
            rec = records[flushed]
            if writer is not None:
                writer.writerow(rec.row())
                fh.flush()
                sfh.write(json.dumps({"instance": rec.instance, "config": rec.config, **rec.extra},
                                     sort_keys=True) + "\n")
                sfh.flush()
            flushed += 1

    try:
        if not isolate:
            for i, (p, c) in enumerate(tasks):
                records[i] = run_one(p, c, timeout, planner_overrides)
                flush_ready()
        else:
            _run_isolated(tasks, records, timeout, grace, max(1, jobs), planner_overrides, flush_ready)
    finally:
        if fh is not None:
            fh.close()
            sfh.close()
    return records


def _run_isolated(tasks, records, timeout, grace, jobs, overrides, on_done):
    ctx = mp.get_context("fork")
    pending = list(enumerate(tasks))
    pending.reverse()
    running = {}  # index -> (process, conn, start)
    while pending or running:
        while pending and len(running) < jobs:
            i, (p, c) = pending.pop()
            parent, child = ctx.Pipe(duplex=False)
            proc = ctx.Process(target=_worker, args=(child, p, c, timeout, overrides), daemon=True)
            proc.start()
            child.close()
            running[i] = (proc, parent, time.perf_counter())
        done = []
        for i, (proc, conn, t0) in running.items():
            p, c = tasks[i]
            name = Path(p).stem
            if conn.poll():
                try:
                    msg = conn.recv()
                except EOFError:
                    msg = {"error": "worker exited without a result"}
                proc.join()
                if "error" in msg:
                    records[i] = RunRecord(name, c, False, time.perf_counter() - t0,
                                           extra={"status": "error", "error": msg["error"]})
                else:
                    records[i] = RunRecord(**msg)
                done.append(i)
            elif not proc.is_alive():
                records[i] = RunRecord(name, c, False, time.perf_counter() - t0,
                                       extra={"status": "error", "error": f"exit code {proc.exitcode}"})
                done.append(i)
            elif time.perf_counter() - t0 > timeout + grace:
                proc.kill()
                proc.join()
                records[i] = RunRecord(name, c, False, min(time.perf_counter() - t0, timeout + grace),
                                       extra={"status": "killed"})
                done.append(i)
        for i in done:
            _, conn, _ = running.pop(i)
            conn.close()
        if done:
            on_done()
        elif running:
            # block until a worker reports or dies, waking in time for the kill deadline
            now = time.perf_counter()
            wake = min(t0 + timeout + grace for _, _, t0 in running.values()) - now
            handles = [c for _, c, _ in running.values()] + [pr.sentinel for pr, _, _ in running.values()]
            mp_connection.wait(handles, timeout=max(0.0, wake) + 0.01)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- summaries

@dataclass
class SuiteSummary:
    base: str
    test: str
    success_rate: dict[str, float]
    solved: dict[str, int]
    total: dict[str, int]
    timeouts: dict[str, int]
    avg_time_own: dict[str, float | None]
    avg_time_mutual: dict[str, float | None]
    total_runtime: dict[str, float]
    mutual: int
    speedup: float | None
    cells: list[dict]
    plot: list[dict]

    def as_dict(self) -> dict:
        return asdict(self)


def geometric_mean_speedup(base_times: Sequence[float], test_times: Sequence[float]) -> float | None:
    if not base_times:
        return None
    logs = [math.log(b / t) for b, t in zip(base_times, test_times)]
    return math.exp(math.fsum(logs) / len(logs))


def _side(rows, config):
    out = {}
    for r in rows:
        if r["config"] == config:
            out[r["instance"]] = r
    return out


def _stats_for(base_rows: dict, test_rows: dict, base: str, test: str, names: Iterable[str]) -> dict:
    names = sorted(names)
    b_solved = {n for n in names if n in base_rows and base_rows[n]["solved"] == "1"}
    t_solved = {n for n in names if n in test_rows and test_rows[n]["solved"] == "1"}
    mutual = sorted(b_solved & t_solved)
    bt = [float(base_rows[n]["wall_time_s"]) for n in mutual]
    tt = [float(test_rows[n]["wall_time_s"]) for n in mutual]

    def mean(v):
        return math.fsum(v) / len(v) if v else None

    def to(rows, solved):
        return sum(1 for n in names if n in rows and n not in solved)

    return {
        "instances": len(names),
        "success_rate": {base: 100.0 * len(b_solved) / len(names) if names else 0.0,
                         test: 100.0 * len(t_solved) / len(names) if names else 0.0},
        "solved": {base: len(b_solved), test: len(t_solved)},
        "timeouts": {base: to(base_rows, b_solved), test: to(test_rows, t_solved)},
        "avg_time_own": {base: mean([float(base_rows[n]["wall_time_s"]) for n in sorted(b_solved)]),
                         test: mean([float(test_rows[n]["wall_time_s"]) for n in sorted(t_solved)])},
        "avg_time_mutual": {base: mean(bt), test: mean(tt)},
        "mutual": len(mutual),
        "speedup": geometric_mean_speedup(bt, tt),
    }


def summarize(csv_path, base: str, test: str) -> SuiteSummary:
    rows = read_csv(csv_path)
    base_rows = _side(rows, base)
    test_rows = _side(rows, test)
    if not base_rows or not test_rows:
        raise ValueError(f"CSV must contain rows for both {base!r} and {test!r}")
    names = set(base_rows) | set(test_rows)
    overall = _stats_for(base_rows, test_rows, base, test, names)
    cells_map = defaultdict(list)
    by_agents = defaultdict(list)
    for n in names:
        meta = parse_instance_id(n)
        if meta is None:
            continue
        cells_map[(meta["map"], meta["agents"], meta["density"])].append(n)
        by_agents[meta["agents"]].append(n)
    cells = []
    for (m, a, d), ns in sorted(cells_map.items()):
        s = _stats_for(base_rows, test_rows, base, test, ns)
        cells.append({"map": m, "agents": a, "density": d, **s})
    plot = []
    for a, ns in sorted(by_agents.items()):
        s = _stats_for(base_rows, test_rows, base, test, ns)
        plot.append({"agents": a, "speedup": s["speedup"], "mutual": s["mutual"]})
    total_runtime = {c: math.fsum(float(r["wall_time_s"]) for r in side.values())
                     for c, side in ((base, base_rows), (test, test_rows))}
    return SuiteSummary(base, test, overall["success_rate"], overall["solved"],
                        {base: len(base_rows), test: len(test_rows)}, overall["timeouts"],
                        overall["avg_time_own"], overall["avg_time_mutual"], total_runtime,
                        overall["mutual"], overall["speedup"], cells, plot)


def _fmt(v, spec=".2f"):
    return "n/a" if v is None else format(v, spec)


def format_table(s: SuiteSummary) -> str:
    """Markdown table: one row per (map, agents, scenario) cell plus an overall row."""
    b, t = s.base, s.test
    head = (f"| Map | Agents | Scenario | {b} SR (%) | {t} SR (%) | {b} time (s) | {t} time (s) "
            f"| Speedup |\n|---|---|---|---|---|---|---|---|")
    lines = [head]
    for c in s.cells:
        scen = "empty" if c["density"] == 0 else f"obstacles {c['density']}%"
        lines.append(f"| {c['map']}x{c['map']} | {c['agents']} | {scen} "
                     f"| {_fmt(c['success_rate'][b], '.1f')} | {_fmt(c['success_rate'][t], '.1f')} "
                     f"| {_fmt(c['avg_time_mutual'][b], '.3f')} | {_fmt(c['avg_time_mutual'][t], '.3f')} "
                     f"| {_fmt(c['speedup'])}x |")
    lines.append(f"| all | | overall | {_fmt(s.success_rate[b], '.1f')} | {_fmt(s.success_rate[t], '.1f')} "
                 f"| {_fmt(s.avg_time_mutual[b], '.3f')} | {_fmt(s.avg_time_mutual[t], '.3f')} "
                 f"| {_fmt(s.speedup)}x |")
    notes = [
        "",
        f"Times are means over instances solved by both configurations ({s.mutual} overall).",
        f"Mean over each configuration's own solved set: {b} {_fmt(s.avg_time_own[b], '.3f')} s, "
        f"{t} {_fmt(s.avg_time_own[t], '.3f')} s.",
        f"Timeouts/unsolved: {b} {s.timeouts[b]}, {t} {s.timeouts[t]}.",
    ]
    return "\n".join(lines + notes) + "\n"


def write_summary(s: SuiteSummary, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"json": out / "summary.json", "table": out / "table.md", "plot": out / "speedup_vs_agents.csv"}
    files["json"].write_text(json.dumps(s.as_dict(), indent=2, sort_keys=True) + "\n")
    files["table"].write_text(format_table(s))
    with open(files["plot"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agents", "speedup", "mutual_solved"])
        for p in s.plot:
            w.writerow([p["agents"], "" if p["speedup"] is None else repr(p["speedup"]), p["mutual"]])
    return files
